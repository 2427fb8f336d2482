#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "netshock/dates.hpp"

namespace netshock {

struct TransactionRecord {
  Date date;
  std::string sender_firm_id;
  std::string receiver_firm_id;
  std::string sender_rayon_id;
  std::string receiver_rayon_id;
  std::int64_t weight_kg = 0;
};

struct FirmRecord {
  std::string firm_id;
  std::string rayon_id;
  std::string province_id;
  bool conflict_flag = false;
};

struct AccountingRecord {
  std::string firm_id;
  int year = 0;
  double sales = 0;
  double profits = 0;
  double total_costs = 0;
};

// Lookup over firms.csv. A rayon counts as conflict territory when any firm
// registered there carries the conflict flag, or when it is listed explicitly.
class FirmTable {
 public:
  FirmTable() = default;
  explicit FirmTable(std::vector<FirmRecord> firms, std::set<std::string> extra_conflict_rayons = {});

  const FirmRecord* find(const std::string& firm_id) const;
  const FirmRecord& at(const std::string& firm_id) const;
  bool contains(const std::string& firm_id) const { return index_.count(firm_id) != 0; }

  bool is_conflict_rayon(const std::string& rayon_id) const { return conflict_rayons_.count(rayon_id) != 0; }
  bool is_conflict_firm(const std::string& firm_id) const;
  // Province of a rayon as declared by the firms registered there; falls back
  // to `fallback` for rayons that host no registered firm.
  const std::string& province_of_rayon(const std::string& rayon_id, const std::string& fallback) const;

  const std::vector<FirmRecord>& records() const noexcept { return firms_; }
  const std::set<std::string>& conflict_rayons() const noexcept { return conflict_rayons_; }
  std::vector<std::string> conflict_firm_ids() const;

 private:
  std::vector<FirmRecord> firms_;
  std::unordered_map<std::string, std::size_t> index_;
  std::set<std::string> conflict_rayons_;
  std::unordered_map<std::string, std::string> rayon_province_;
};

struct IngestOptions {
  Date window_start{2013, 1, 1};
  Date window_end{2016, 12, 31};
  bool strict = true;
  // Shipments touching one of these rayons are international; dropped only when
  // exclude_international is set.
  std::set<std::string> foreign_rayons;
  bool exclude_international = false;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t kept = 0;
  std::size_t malformed_skipped = 0;
  std::size_t conflict_internal_excluded = 0;
  std::size_t out_of_window = 0;
  std::size_t zero_weight = 0;
  std::size_t international_excluded = 0;
  std::size_t first_malformed_line = 0;
};

struct TransactionLoad {
  std::vector<TransactionRecord> records;
  IngestReport report;
};

TransactionLoad parse_transactions(std::istream& in, const FirmTable& firms, const IngestOptions& options);
TransactionLoad load_transactions(const std::string& path, const FirmTable& firms, const IngestOptions& options);

std::vector<FirmRecord> parse_firms(std::istream& in);
std::vector<FirmRecord> load_firms(const std::string& path);

std::vector<AccountingRecord> parse_accounting(std::istream& in, bool strict = true);
std::vector<AccountingRecord> load_accounting(const std::string& path, bool strict = true);

void write_transactions(std::ostream& out, const std::vector<TransactionRecord>& records);
void write_firms(std::ostream& out, const std::vector<FirmRecord>& firms);
void write_accounting(std::ostream& out, const std::vector<AccountingRecord>& records);

// Establishment = (firm, rayon); the node identity of the trade panel.
struct Establishment {
  std::string firm_id;
  std::string rayon_id;

  auto operator<=>(const Establishment&) const = default;
};

struct PairDirection {
  std::uint32_t origin = 0;       // establishment index (supplier)
  std::uint32_t destination = 0;  // establishment index (buyer)
  int first_active_month = 0;     // offset into the panel months
  bool first_trade_post = false;  // first shipment falls in the Post period

  // Treatment flags, populated by assign_treatment_flags.
  bool conflict = false;
  bool partner_conflict = false;
  bool buyer_conflict = false;
  bool supplier_conflict = false;
  bool partner_buyer_conflict = false;
  bool partner_supplier_conflict = false;
  bool both_conflict = false;
  std::uint32_t origin_partners_pre = 0;
  std::uint32_t destination_partners_pre = 0;
};

struct PanelCell {
  std::uint32_t n_shipments = 0;
  std::int64_t total_weight_kg = 0;

  bool any_shipment() const noexcept { return n_shipments > 0; }
};

struct PanelOptions {
  YearMonth start{2013, 1};
  YearMonth end{2016, 12};
  YearMonth post_start{2014, 3};
  // Keep pair-directions whose first shipment is in the Post period.
  bool include_post_entrants = true;
};

// Balanced establishment-pair-direction x month panel. Cells are stored
// pair-major: cell(p, t) lives at p * n_months + t.
class TradePanel {
 public:
  YearMonth start;
  int n_months = 0;
  YearMonth post_start{2014, 3};
  std::vector<Establishment> establishments;
  std::vector<PairDirection> pairs;
  std::vector<PanelCell> cells;
  bool flags_assigned = false;

  const PanelCell& cell(std::size_t pair, int month) const { return cells[pair * n_months + month]; }
  YearMonth month_at(int offset) const { return start.plus(offset); }
  bool is_post(int offset) const { return month_at(offset) >= post_start; }
  std::size_t n_cells() const noexcept { return cells.size(); }
};

// Every firm id in records must resolve in firms; otherwise throws
// Error{referential} naming the unresolved ids.
TradePanel build_trade_panel(const std::vector<TransactionRecord>& records, const FirmTable& firms,
                             const PanelOptions& options);

struct TreatmentOptions {
  YearMonth preconflict_start{2013, 1};
  YearMonth preconflict_end{2014, 2};
  // Measure conflict location and preconflict ties over all establishments of a firm.
  bool firm_level = false;
};

TradePanel assign_treatment_flags(TradePanel panel, const FirmTable& firms, const TreatmentOptions& options);

struct Flow {
  std::string from;
  std::string to;
  double weight = 0;

  auto operator<=>(const Flow&) const = default;
};

// Firm-level directed flows for one calendar year, sorted by (from, to).
std::vector<Flow> build_yearly_flows(const std::vector<TransactionRecord>& records, const FirmTable& firms, int year);

void write_flows(std::ostream& out, const std::vector<Flow>& flows);
std::vector<Flow> parse_flows(std::istream& in);

}  // namespace netshock
