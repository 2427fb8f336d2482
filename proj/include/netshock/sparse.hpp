#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace netshock {

struct Triplet {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0;
};

// Compressed sparse row matrix. Rows are kept sorted by column; duplicate
// triplets are summed and explicit zeros dropped.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  std::span<const std::uint32_t> row_indices(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  double coeff(std::size_t r, std::size_t c) const;

  // y = scale * A x. Row-parallel; each y_i is summed in column order.
  void multiply(std::span<const double> x, std::span<double> y, double scale = 1.0) const;
  std::vector<double> column_sums() const;
  std::vector<Triplet> triplets() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace netshock
