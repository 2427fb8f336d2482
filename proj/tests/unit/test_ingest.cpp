#include <doctest.h>

#include <sstream>

#include "netshock/error.hpp"
#include "netshock/ingest.hpp"

using namespace netshock;

namespace {

const char* kHeader = "date,sender_firm_id,receiver_firm_id,sender_rayon_id,receiver_rayon_id,weight_kg\n";

FirmTable fixture_firms() {
  return FirmTable({{"F1", "R1", "P1", false},
                    {"F2", "R2", "P1", false},
                    {"F3", "RC", "PC", true},
                    {"F4", "RC", "PC", true},
                    {"F5", "R3", "P2", false}});
}

TransactionLoad parse(const std::string& body, const FirmTable& firms, IngestOptions opt = {}) {
  std::istringstream in(kHeader + body);
  return parse_transactions(in, firms, opt);
}

TransactionRecord tx(const std::string& date, const std::string& s, const std::string& r, const std::string& rs,
                     const std::string& rr, std::int64_t w) {
  return {parse_date(date), s, r, rs, rr, w};
}

const PairDirection* find_pair(const TradePanel& p, const std::string& from, const std::string& to) {
  for (const auto& pd : p.pairs) {
    if (p.establishments[pd.origin].firm_id == from && p.establishments[pd.destination].firm_id == to) return &pd;
  }
  return nullptr;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("well-formed row maps to a record") {
    const auto load = parse("2013-05-02,F1,F2,R1,R2,100000\n", fixture_firms());
    REQUIRE(load.records.size() == 1);
    const auto& r = load.records[0];
    CHECK(r.date == Date{2013, 5, 2});
    CHECK(r.sender_firm_id == "F1");
    CHECK(r.receiver_rayon_id == "R2");
    CHECK(r.weight_kg == 100000);
  }

  TEST_CASE("negative weight is a parse error naming the line") {
    try {
      parse("2013-05-02,F1,F2,R1,R2,100\n2013-05-03,F1,F2,R1,R2,-5\n", fixture_firms());
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("lenient mode skips and counts malformed rows") {
    IngestOptions opt;
    opt.strict = false;
    const auto load = parse("2013-05-02,F1,F2,R1,R2,100\nnot-a-date,F1,F2,R1,R2,5\n2013-05-03,F1,F2,R1,R2,x\n",
                            fixture_firms(), opt);
    CHECK(load.records.size() == 1);
    CHECK(load.report.malformed_skipped == 2);
    CHECK(load.report.first_malformed_line == 3);
  }

  TEST_CASE("conflict-internal, zero-weight and out-of-window rows are excluded and counted") {
    const auto load = parse(
        "2013-05-02,F3,F4,RC,RC,100\n"
        "2013-05-02,F1,F2,R1,R2,0\n"
        "2012-12-31,F1,F2,R1,R2,7\n"
        "2013-05-02,F3,F1,RC,R1,9\n",
        fixture_firms());
    CHECK(load.records.size() == 1);
    CHECK(load.report.conflict_internal_excluded == 1);
    CHECK(load.report.zero_weight == 1);
    CHECK(load.report.out_of_window == 1);
    CHECK(load.report.rows_read == 4);
  }

  TEST_CASE("firm table derives conflict rayons and provinces") {
    const auto firms = fixture_firms();
    CHECK(firms.is_conflict_rayon("RC"));
    CHECK_FALSE(firms.is_conflict_rayon("R1"));
    CHECK(firms.is_conflict_firm("F3"));
    CHECK(firms.province_of_rayon("R3", "?") == "P2");
    CHECK(firms.province_of_rayon("R9", "?") == "?");
  }

  TEST_CASE("panel: one shipment gives 48 cells with one active") {
    const auto firms = fixture_firms();
    const auto panel = build_trade_panel({tx("2013-06-10", "F1", "F2", "R1", "R2", 500)}, firms, {});
    REQUIRE(panel.pairs.size() == 1);
    CHECK(panel.n_months == 48);
    CHECK(panel.n_cells() == 48);
    int active = 0;
    for (int t = 0; t < panel.n_months; ++t) active += panel.cell(0, t).any_shipment();
    CHECK(active == 1);
    CHECK(panel.cell(0, 5).total_weight_kg == 500);
  }

  TEST_CASE("panel: shipments in one month aggregate") {
    const auto firms = fixture_firms();
    const auto panel = build_trade_panel({tx("2013-06-01", "F1", "F2", "R1", "R2", 1000),
                                          tx("2013-06-15", "F1", "F2", "R1", "R2", 2000),
                                          tx("2013-06-30", "F1", "F2", "R1", "R2", 3000)},
                                         firms, {});
    REQUIRE(panel.pairs.size() == 1);
    CHECK(panel.cell(0, 5).n_shipments == 3);
    CHECK(panel.cell(0, 5).total_weight_kg == 6000);
  }

  TEST_CASE("panel: unknown firm is a referential error") {
    const auto firms = fixture_firms();
    try {
      build_trade_panel({tx("2013-06-01", "F1", "FX", "R1", "R2", 10)}, firms, {});
      FAIL("expected referential error");
    } catch (const Error& e) {
      CHECK(e.category() == ErrorCategory::referential);
      CHECK(std::string(e.what()).find("FX") != std::string::npos);
    }
  }

  TEST_CASE("panel: post entrants follow the switch") {
    const auto firms = fixture_firms();
    const std::vector<TransactionRecord> recs = {tx("2013-06-01", "F1", "F2", "R1", "R2", 10),
                                                 tx("2015-01-01", "F2", "F5", "R2", "R3", 10)};
    PanelOptions opt;
    CHECK(build_trade_panel(recs, firms, opt).pairs.size() == 2);
    opt.include_post_entrants = false;
    CHECK(build_trade_panel(recs, firms, opt).pairs.size() == 1);
  }

  TEST_CASE("treatment: conflict sender") {
    const auto firms = fixture_firms();
    const auto panel = assign_treatment_flags(
        build_trade_panel({tx("2013-06-01", "F3", "F2", "RC", "R2", 10)}, firms, {}), firms, {});
    const auto* p = find_pair(panel, "F3", "F2");
    REQUIRE(p);
    CHECK(p->conflict);
    CHECK(p->supplier_conflict);
    CHECK_FALSE(p->buyer_conflict);
    CHECK_FALSE(p->partner_conflict);
  }

  TEST_CASE("treatment: preconflict buyer in the conflict area makes partners second-degree") {
    const auto firms = fixture_firms();
    const auto panel = assign_treatment_flags(build_trade_panel({tx("2013-06-01", "F1", "F3", "R1", "RC", 10),
                                                                 tx("2013-07-01", "F1", "F2", "R1", "R2", 10)},
                                                                firms, {}),
                                              firms, {});
    const auto* p = find_pair(panel, "F1", "F2");
    REQUIRE(p);
    CHECK_FALSE(p->conflict);
    CHECK(p->partner_conflict);
    CHECK(p->partner_buyer_conflict);
    CHECK_FALSE(p->partner_supplier_conflict);
    CHECK(p->origin_partners_pre == 2);
    CHECK(p->destination_partners_pre == 1);
  }

  TEST_CASE("treatment: post-period ties do not count as preconflict partners") {
    const auto firms = fixture_firms();
    const auto panel = assign_treatment_flags(build_trade_panel({tx("2014-06-01", "F1", "F3", "R1", "RC", 10),
                                                                 tx("2013-07-01", "F1", "F2", "R1", "R2", 10)},
                                                                firms, {}),
                                              firms, {});
    const auto* p = find_pair(panel, "F1", "F2");
    REQUIRE(p);
    CHECK_FALSE(p->partner_conflict);
  }

  TEST_CASE("yearly flows") {
    const auto firms = fixture_firms();
    const std::vector<TransactionRecord> recs = {tx("2013-03-01", "F1", "F2", "R1", "R2", 100),
                                                 tx("2013-09-01", "F1", "F2", "R1", "R2", 200),
                                                 tx("2014-01-01", "F1", "F5", "R1", "R3", 50),
                                                 tx("2013-04-01", "F2", "F1", "R2", "R1", 40)};
    const auto flows = build_yearly_flows(recs, firms, 2013);
    REQUIRE(flows.size() == 2);
    CHECK(flows[0] == Flow{"F1", "F2", 300});
    CHECK(flows[1] == Flow{"F2", "F1", 40});

    std::stringstream ss;
    write_flows(ss, flows);
    CHECK(parse_flows(ss) == flows);
  }

  TEST_CASE("record writers round-trip") {
    const auto firms = fixture_firms();
    std::stringstream ss;
    write_firms(ss, firms.records());
    const auto back = parse_firms(ss);
    REQUIRE(back.size() == firms.records().size());
    CHECK(back[2].conflict_flag);

    std::vector<AccountingRecord> acc = {{"F1", 2013, 10.5, 1.5, 9}, {"F2", 2014, 3, -1, 4}};
    std::stringstream sa;
    write_accounting(sa, acc);
    const auto acc2 = parse_accounting(sa);
    REQUIRE(acc2.size() == 2);
    CHECK(acc2[1].profits == -1);
  }
}
