#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "ocpred/ingest.hpp"
#include "ocpred/unfold.hpp"

using namespace ocpred;

TEST_CASE("ocel json parsing maps events and objects") {
  const auto log = parse_ocel_json(fixtures::procurement_ocel_json());
  CHECK(log.size() == 21);
  CHECK(log.registry.object_types().size() == 5);
  CHECK(log.registry.otyp.size() == 14);  // 1 contract, 2 requisitions, 4 orders, 4 receipts, 3 invoices
  CHECK(validate_log(log).empty());
  const EventRecord* e13 = log.find_event("e13");
  REQUIRE(e13 != nullptr);
  CHECK(e13->omap == std::vector<std::string>{"i1", "r1", "r2"});

  SUBCASE("empty log") {
    const auto empty = parse_ocel_json(R"({"ocel:events":{},"ocel:objects":{}})");
    CHECK(empty.size() == 0);
  }

  SUBCASE("unknown object reference is a referential error") {
    const char* doc = R"({
      "ocel:events": {"e1": {"ocel:activity": "A", "ocel:timestamp": "2020-01-01 10:00",
                             "ocel:omap": ["zz"], "ocel:vmap": {}}},
      "ocel:objects": {"x": {"ocel:type": "T"}}
    })";
    CHECK_THROWS_WITH_AS(parse_ocel_json(doc), doctest::Contains("unknown object 'zz'"), Error);
  }

  SUBCASE("malformed json reports a byte offset") {
    try {
      parse_ocel_json("{\"ocel:events\": ");
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::parse);
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }
}

TEST_CASE("flat csv parsing splits multi-id cells and skips blanks") {
  const auto log = parse_flat_csv(fixtures::procurement_csv(), fixtures::procurement_csv_schema());
  CHECK(log.size() == 21);
  const EventRecord* e13 = log.find_event("e13");
  REQUIRE(e13 != nullptr);
  CHECK(e13->omap == std::vector<std::string>{"i1", "r1", "r2"});
  const EventRecord* e3 = log.find_event("e3");
  REQUIRE(e3 != nullptr);
  CHECK(e3->attr("order_price") == nullptr);  // blank cell stays unassigned

  SUBCASE("duplicate event ids are rejected") {
    std::string csv = "id,activity,timestamp,T\n";
    csv += "e1,A,2020-01-01 10:00,x\n";
    csv += "e1,B,2020-01-02 10:00,x\n";
    FlatCsvSchema schema;
    schema.object_type_columns = {"T"};
    CHECK_THROWS_WITH_AS(parse_flat_csv(csv, schema), doctest::Contains("duplicate event id"), Error);
  }

  SUBCASE("unparseable timestamps carry the row number") {
    std::string csv = "id,activity,timestamp,T\n";
    csv += "e1,A,whenever,x\n";
    FlatCsvSchema schema;
    schema.object_type_columns = {"T"};
    CHECK_THROWS_WITH_AS(parse_flat_csv(csv, schema), doctest::Contains("row 2"), Error);
  }
}

TEST_CASE("csv write/parse round trip preserves the log") {
  const auto original = fixtures::procurement_log();
  const auto schema = fixtures::procurement_csv_schema();
  const std::string csv = write_flat_csv(original, &schema);
  const auto reparsed = parse_flat_csv(csv, schema);
  REQUIRE(reparsed.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    const EventRecord& a = original.event(i);
    const EventRecord& b = reparsed.event(i);
    CHECK(a.id == b.id);
    CHECK(a.activity == b.activity);
    CHECK(a.timestamp == b.timestamp);
    CHECK(a.omap == b.omap);
    CHECK(a.vmap == b.vmap);
  }
  CHECK(original.registry.otyp == reparsed.registry.otyp);
}

TEST_CASE("single-id csv repeats shared events per trace") {
  auto log = fixtures::procurement_log_ptr();
  const auto view = fixtures::narrow_requisition_view(log, UnfoldMode::object_centric);
  const std::string csv = write_single_id_csv(view);
  const auto table = detail::parse_csv(csv);
  CHECK(table.rows.size() == 1 + 20);  // header + 14 + 6
  CHECK(table.rows[0][0] == "case_id");
  std::size_t e4_rows = 0;
  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    if (table.rows[r][1] == "e4") ++e4_rows;
  }
  CHECK(e4_rows == 2);  // shared by both traces

  SUBCASE("naive view yields seven rows") {
    const auto naive = unfold_log(log, "Requisition", {UnfoldMode::naive, std::nullopt});
    const auto naive_table = detail::parse_csv(write_single_id_csv(naive));
    CHECK(naive_table.rows.size() == 1 + 7);
  }

  SUBCASE("empty view is header only") {
    SingleIdLog empty;
    empty.source = log;
    empty.viewpoint_type = "Requisition";
    const auto t = detail::parse_csv(write_single_id_csv(empty));
    CHECK(t.rows.size() == 1);
  }
}

TEST_CASE("sparse attributes are dropped against their owner scope") {
  // attribute set on 1 of 21 events, no single owning type -> global scope
  auto log = fixtures::procurement_log();
  {
    LogBuilder b;
    for (const auto& [id, type] : log.registry.otyp) b.add_object(id, type);
    for (const auto& e : log.events) {
      auto vmap = e.vmap;
      if (e.id == "e9") vmap["rare_note"] = AttributeValue::text("checked");
      b.add_event(e.id, e.activity, e.timestamp, e.omap, vmap);
    }
    b.set_attribute_kind("order_delivery_month", AttrKind::categorical);
    log = b.build();
  }
  auto [reduced, dropped] = drop_sparse_attributes(log, 0.8);
  CHECK(std::set<std::string>(dropped.begin(), dropped.end()) == std::set<std::string>{"rare_note"});
  CHECK(reduced.attribute_schema.count("rare_note") == 0);
  CHECK(reduced.attribute_schema.count("order_price") == 1);

  SUBCASE("attribute present everywhere is kept") {
    auto [log2, dropped2] = drop_sparse_attributes(fixtures::procurement_log(), 0.8);
    for (const auto& name : dropped2) CHECK(name != "user");
  }

  SUBCASE("threshold 1.0 drops nothing that was ever observed") {
    auto [log3, dropped3] = drop_sparse_attributes(log, 1.0);
    CHECK(dropped3.empty());
  }

  SUBCASE("owner scope keeps structurally blank attributes") {
    // order_price is missing on contract-only events but never dropped,
    // because its scope is the order events
    auto [log4, dropped4] = drop_sparse_attributes(fixtures::procurement_log(), 0.5);
    CHECK(std::find(dropped4.begin(), dropped4.end(), "order_price") == dropped4.end());
  }
}

TEST_CASE("constant attributes are dropped") {
  LogBuilder b;
  b.add_object("x", "T");
  b.add_event("e1", "A", make_instant(2020, 1, 1), {"x"},
              {{"fixed", AttributeValue::text("X")}, {"varies", AttributeValue::text("p")}});
  b.add_event("e2", "B", make_instant(2020, 1, 2), {"x"},
              {{"fixed", AttributeValue::text("X")}, {"varies", AttributeValue::text("q")}});
  auto [reduced, dropped] = drop_constant_attributes(b.build());
  CHECK(dropped == std::vector<std::string>{"fixed"});
  CHECK(reduced.attribute_schema.count("varies") == 1);

  SUBCASE("order_price in the fixture varies and is kept") {
    auto [log2, dropped2] = drop_constant_attributes(fixtures::procurement_log());
    CHECK(std::find(dropped2.begin(), dropped2.end(), "order_price") == dropped2.end());
  }
}

namespace {

ObjectCentricLog frequency_log() {
  // frequencies A:50 B:30 C:15 D:5
  LogBuilder b;
  b.add_object("x", "T");
  int seq = 0;
  auto add = [&](const char* value, int count) {
    for (int i = 0; i < count; ++i) {
      b.add_event("e" + std::to_string(++seq), "A", make_instant(2020, 1, 1, 0, 0) + seq, {"x"},
                  {{"group", AttributeValue::text(value)}});
    }
  };
  add("A", 50);
  add("B", 30);
  add("C", 15);
  add("D", 5);
  return b.build();
}

std::map<std::string, int> value_counts(const ObjectCentricLog& log, const std::string& attr) {
  std::map<std::string, int> counts;
  for (const auto& e : log.events) {
    if (const AttributeValue* v = e.attr(attr)) counts[v->as_text()]++;
  }
  return counts;
}

}  // namespace

TEST_CASE("pareto reduction keeps the covering prefix and rewrites the tail") {
  const auto log = frequency_log();
  const auto reduced = pareto_reduce(log, "group", 0.8);
  const auto counts = value_counts(reduced, "group");
  CHECK(counts.at("A") == 50);
  CHECK(counts.at("B") == 30);
  CHECK(counts.at("other") == 20);
  CHECK(counts.count("C") == 0);

  SUBCASE("idempotent") {
    const auto twice = pareto_reduce(reduced, "group", 0.8);
    CHECK(value_counts(twice, "group") == counts);
  }

  SUBCASE("coverage never drops below the target") {
    for (double coverage : {0.2, 0.5, 0.66, 0.8, 0.95}) {
      const auto r = pareto_reduce(log, "group", coverage);
      const auto c = value_counts(r, "group");
      int kept = 0;
      for (const auto& [value, count] : c) {
        if (value != "other") kept += count;
      }
      if (c.count("other") == 0) kept = 100;
      CHECK(static_cast<double>(kept) / 100.0 >= coverage);
    }
  }

  SUBCASE("coverage 1.0 changes nothing") {
    const auto r = pareto_reduce(log, "group", 1.0);
    CHECK(value_counts(r, "group") == value_counts(log, "group"));
  }

  SUBCASE("single-valued attribute is untouched") {
    LogBuilder b;
    b.add_object("x", "T");
    b.add_event("e1", "A", make_instant(2020, 1, 1), {"x"}, {{"g", AttributeValue::text("only")}});
    const auto r = pareto_reduce(b.build(), "g", 0.8);
    CHECK(value_counts(r, "g").at("only") == 1);
  }

  SUBCASE("numeric attribute is a kind error") {
    CHECK_THROWS_AS(pareto_reduce(fixtures::procurement_log(), "order_price", 0.8), Error);
  }
}

TEST_CASE("drop operations commute") {
  auto log = fixtures::procurement_log();
  {
    LogBuilder b;
    for (const auto& [id, type] : log.registry.otyp) b.add_object(id, type);
    for (const auto& e : log.events) {
      auto vmap = e.vmap;
      if (e.id == "e9") vmap["rare"] = AttributeValue::text("x");
      vmap["always_same"] = AttributeValue::text("k");
      b.add_event(e.id, e.activity, e.timestamp, e.omap, vmap);
    }
    b.set_attribute_kind("order_delivery_month", AttrKind::categorical);
    log = b.build();
  }
  const auto a = drop_constant_attributes(drop_sparse_attributes(log, 0.8).log);
  const auto b = drop_sparse_attributes(drop_constant_attributes(log).log, 0.8);
  std::set<std::string> schema_a, schema_b;
  for (const auto& [name, _] : a.log.attribute_schema) schema_a.insert(name);
  for (const auto& [name, _] : b.log.attribute_schema) schema_b.insert(name);
  CHECK(schema_a == schema_b);
}
