#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "ocpred/encode.hpp"
#include "ocpred/synthetic.hpp"
#include "ocpred/unfold.hpp"

using namespace ocpred;

namespace {

SingleIdLog requisition_view(UnfoldMode mode) {
  return unfold_log(fixtures::procurement_log_ptr(), "Requisition", {mode, std::nullopt});
}

double feature_value(const FeatureSchema& schema, const std::vector<AttributeValue>& x,
                     const std::string& name) {
  auto idx = schema.index_of(name);
  REQUIRE(idx.has_value());
  REQUIRE(x[*idx].is_number());
  return x[*idx].as_number();
}

bool feature_missing(const FeatureSchema& schema, const std::vector<AttributeValue>& x,
                     const std::string& name) {
  auto idx = schema.index_of(name);
  REQUIRE(idx.has_value());
  return x[*idx].is_missing();
}

}  // namespace

TEST_CASE("event tuples order attributes lexicographically and render gaps as missing") {
  const auto log = fixtures::procurement_log();
  std::size_t idx5 = 0, idx14 = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log.event(i).id == "e5") idx5 = i;
    if (log.event(i).id == "e14") idx14 = i;
  }
  const EventTuple t5 = event_tuple(log, idx5);
  CHECK(t5.activity == "Purchase Order Line Creation");
  CHECK(t5.timestamp == make_instant(2017, 7, 16, 15, 0));
  REQUIRE(t5.attributes.size() == 5);
  CHECK(t5.attributes[0].first == "order_delivery_month");
  CHECK(t5.attributes[0].second == AttributeValue::text("7"));
  CHECK(t5.attributes[1].first == "order_price");
  CHECK(t5.attributes[1].second == AttributeValue::number(100));
  CHECK(t5.attributes[2].first == "order_purch_group");
  CHECK(t5.attributes[2].second == AttributeValue::text("100_L50"));
  CHECK(t5.attributes[3].first == "rec_quantity");
  CHECK(t5.attributes[3].second.is_missing());
  CHECK(t5.attributes[4].first == "user");

  SUBCASE("e14 carries no order or receipt attributes") {
    const EventTuple t14 = event_tuple(log, idx14);
    for (const auto& [name, value] : t14.attributes) {
      if (name != "user") CHECK(value.is_missing());
    }
  }
}

TEST_CASE("activity counts cover the prefix") {
  const auto view = requisition_view(UnfoldMode::object_centric);
  const Trace& rq1 = fixtures::trace_of(view, "rq1");
  const std::vector<std::string> activities{"Purchase Requisition Line Created",
                                            "Purchase Order Line Creation", "Goods Line Registered"};
  // prefix e3,e4,e5,e6
  CHECK(activity_counts(view, rq1, 4, activities) == std::vector<std::size_t>{2, 2, 0});
  // full trace: three goods registrations (e8, e12, e15)
  CHECK(activity_counts(view, rq1, rq1.length(), activities) == std::vector<std::size_t>{2, 3, 3});
  // length-1 prefix is a one-hot
  CHECK(activity_counts(view, rq1, 1, activities) == std::vector<std::size_t>{1, 0, 0});
  CHECK_THROWS_AS(activity_counts(view, rq1, 0, activities), Error);
}

TEST_CASE("aggregation features reproduce the worked requisition example") {
  const auto view = requisition_view(UnfoldMode::object_centric_aggregated);
  const Trace& rq1 = fixtures::trace_of(view, "rq1");
  // rq1 = e3 e4 e5 e6 e8 e9 e10 e11 e12 e13 e14 e15 e16 e17

  SUBCASE("average order price per related order") {
    CHECK(aggregate_numeric(view, rq1, 4, "order_price", "Order") == AttributeValue::number(150));
    CHECK(aggregate_numeric(view, rq1, 8, "order_price", "Order") == AttributeValue::number(300));
    CHECK(aggregate_numeric(view, rq1, 1, "order_price", "Order").is_missing());
    // e12 re-prices o2 at 200: mean over o1, o2, o4 stays 300
    CHECK(aggregate_numeric(view, rq1, 9, "order_price", "Order") == AttributeValue::number(300));
  }

  SUBCASE("categorical ratios count one latest value per object") {
    CHECK(aggregate_categorical_ratio(view, rq1, 4, "order_delivery_month", "7", "Order") == 0.5);
    CHECK(aggregate_categorical_ratio(view, rq1, 8, "order_delivery_month", "8", "Order") ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(aggregate_categorical_ratio(view, rq1, 1, "order_delivery_month", "7", "Order") == 0.0);
  }

  SUBCASE("object counts") {
    CHECK(count_objects_by_type(view, rq1, 4, "Order") == 2);
    CHECK(count_objects_by_type(view, rq1, 9, "Receipt") == 2);
    CHECK(count_objects_by_type(view, rq1, 1, "Invoice") == 0);
    CHECK(count_objects_by_type(view, rq1, 6, "Invoice") == 1);  // through e9
  }

  SUBCASE("activity coverage per object type") {
    CHECK(activity_coverage_ratio(view, rq1, 5, "Order", "Goods Line Registered") == 0.5);
    CHECK(activity_coverage_ratio(view, rq1, 12, "Order", "Goods Line Registered") == 1.0);
    CHECK(activity_coverage_ratio(view, rq1, 1, "Order", "Goods Line Registered") == 0.0);
    CHECK(activity_coverage_ratio(view, rq1, 5, "Receipt", "Goods Line Registered") == 1.0);
  }
}

TEST_CASE("schemas are stable, unique and mode-consistent") {
  const auto aggregated = requisition_view(UnfoldMode::object_centric_aggregated);
  const FeatureSchema schema = build_schema(aggregated);
  std::set<std::string> names;
  for (const auto& f : schema.features) CHECK(names.insert(f.name).second);

  SUBCASE("naive feature names are a subset of the object-centric ones") {
    const auto naive = requisition_view(UnfoldMode::naive);
    const auto object = requisition_view(UnfoldMode::object_centric);
    const FeatureSchema ns = build_schema(naive);
    const FeatureSchema os = build_schema(object);
    std::set<std::string> object_names;
    for (const auto& f : os.features) object_names.insert(f.name);
    for (const auto& f : ns.features) CHECK(object_names.count(f.name) == 1);
  }

  SUBCASE("aggregated schema carries every aggregation family") {
    CHECK(schema.index_of("objects:Order").has_value());
    CHECK(schema.index_of("mean:order_price").has_value());
    CHECK(schema.index_of("share:order_delivery_month=7").has_value());
    CHECK(schema.index_of("coverage:Order:Goods Line Registered").has_value());
    // the viewpoint type itself is never aggregated
    CHECK_FALSE(schema.index_of("objects:Requisition").has_value());
    // the global user attribute has no owner and no aggregate
    CHECK_FALSE(schema.index_of("share:user=A456").has_value());
  }

  SUBCASE("schema/log mode mismatch is an error") {
    const auto naive = requisition_view(UnfoldMode::naive);
    const Trace& t = naive.traces.front();
    CHECK_THROWS_AS(encode_prefix(naive, t, 1, schema), Error);
  }
}

TEST_CASE("encoded prefixes match the worked example coordinates") {
  const auto view = requisition_view(UnfoldMode::object_centric_aggregated);
  const FeatureSchema schema = build_schema(view);
  const Trace& rq1 = fixtures::trace_of(view, "rq1");

  SUBCASE("prefix through e6") {
    const auto x = encode_prefix(view, rq1, 4, schema);
    CHECK(feature_value(schema, x, "objects:Order") == 2);
    CHECK(feature_value(schema, x, "mean:order_price") == 150);
    CHECK(feature_value(schema, x, "share:order_delivery_month=7") == 0.5);
    CHECK(feature_value(schema, x, "count:Purchase Order Line Creation") == 2);
    auto last_activity = schema.index_of("last_activity");
    CHECK(x[*last_activity].as_text() == "Purchase Order Line Creation");
    CHECK(feature_value(schema, x, "elapsed_seconds") ==
          static_cast<double>(make_instant(2017, 7, 17, 15, 0) - make_instant(2017, 7, 15, 12, 0)));
  }

  SUBCASE("prefix through e3 zeroes the downstream aggregates") {
    const auto x = encode_prefix(view, rq1, 1, schema);
    for (const char* name : {"objects:Order", "objects:Receipt", "objects:Invoice"}) {
      CHECK(feature_value(schema, x, name) == 0);
    }
    CHECK(feature_missing(schema, x, "mean:order_price"));
    CHECK(feature_missing(schema, x, "mean:rec_quantity"));
    for (const auto& f : schema.features) {
      if (f.source == FeatureSource::aggregate_categorical_ratio ||
          f.source == FeatureSource::activity_coverage) {
        if (f.object_type == "Contract") continue;  // the contract is already present at e3
        CHECK(x[*schema.index_of(f.name)].as_number() == 0.0);
      }
    }
    CHECK(feature_value(schema, x, "elapsed_seconds") == 0);
  }

  SUBCASE("length-one prefixes one-hot the activity counts") {
    const auto x = encode_prefix(view, rq1, 1, schema);
    double total = 0;
    for (const auto& f : schema.features) {
      if (f.source == FeatureSource::activity_count) total += x[*schema.index_of(f.name)].as_number();
    }
    CHECK(total == 1);
  }
}

TEST_CASE("datasets enumerate every prefix of every trace in order") {
  auto log = fixtures::procurement_log_ptr();
  const auto narrow = fixtures::narrow_requisition_view(log, UnfoldMode::object_centric);
  const FeatureSchema schema = build_schema(narrow);
  const Dataset dataset = build_dataset(narrow, schema);
  CHECK(dataset.rows.size() == 20);  // 14 + 6

  std::size_t at = 0;
  for (const auto& trace : narrow.traces) {
    for (std::size_t len = 1; len <= trace.length(); ++len, ++at) {
      CHECK(dataset.rows[at].case_id == trace.case_id);
      CHECK(dataset.rows[at].prefix_len == len);
    }
  }

  SUBCASE("naive view yields seven instances") {
    const auto naive = requisition_view(UnfoldMode::naive);
    const FeatureSchema ns = build_schema(naive);
    CHECK(build_dataset(naive, ns).rows.size() == 7);
  }

  SUBCASE("single-event trace yields one instance") {
    LogBuilder b;
    b.add_object("x", "T");
    b.add_event("e1", "A", make_instant(2020, 1, 1), {"x"});
    auto small = std::make_shared<const ObjectCentricLog>(b.build());
    const auto view = unfold_log(small, "T", {UnfoldMode::object_centric, std::nullopt});
    CHECK(build_dataset(view, build_schema(view)).rows.size() == 1);
  }

  SUBCASE("dataset csv carries features plus case, length and label columns") {
    const std::string csv = write_dataset_csv(dataset);
    const auto table = detail::parse_csv(csv);
    REQUIRE(table.rows.size() == 21);
    const auto& header = table.rows[0];
    REQUIRE(header.size() == schema.size() + 3);
    CHECK(header[header.size() - 3] == "case_id");
    CHECK(header[header.size() - 2] == "prefix_len");
    CHECK(header.back() == "label");
  }
}

TEST_CASE("aggregate values match a naive re-scan oracle on random logs") {
  for (std::uint64_t seed = 11; seed <= 14; ++seed) {
    SyntheticSpec spec;
    spec.n_requisitions = 4;
    spec.requisitions_per_contract = 2;
    spec.max_orders = 3;
    spec.contract_order_prob = 0.4;
    spec.seed = seed;
    auto log = std::make_shared<const ObjectCentricLog>(generate_synthetic(spec));
    const auto view = unfold_log(log, "Requisition", {UnfoldMode::object_centric_aggregated, std::nullopt});
    const FeatureSchema schema = build_schema(view);

    for (const auto& trace : view.traces) {
      std::vector<double> prev_counts;
      for (std::size_t len = 1; len <= trace.length(); ++len) {
        const auto x = encode_prefix(view, trace, len, schema);
        const auto oracle = oracles::prefix_oracle(view, trace, len);
        std::vector<double> counts;
        for (std::size_t f = 0; f < schema.size(); ++f) {
          const auto& desc = schema.features[f];
          switch (desc.source) {
            case FeatureSource::object_count: {
              CHECK(x[f].as_number() == static_cast<double>(oracle.object_count(desc.object_type)));
              counts.push_back(x[f].as_number());
              break;
            }
            case FeatureSource::aggregate_numeric: {
              const auto expected = oracle.numeric_mean(desc.attribute, desc.object_type);
              if (expected) {
                CHECK(x[f].as_number() == doctest::Approx(*expected).epsilon(1e-12));
              } else {
                CHECK(x[f].is_missing());
              }
              break;
            }
            case FeatureSource::aggregate_categorical_ratio: {
              const double v = x[f].as_number();
              CHECK(v >= 0.0);
              CHECK(v <= 1.0);
              CHECK(v ==
                    doctest::Approx(oracle.categorical_share(desc.attribute, desc.value, desc.object_type))
                        .epsilon(1e-12));
              break;
            }
            case FeatureSource::activity_coverage: {
              const double v = x[f].as_number();
              CHECK(v >= 0.0);
              CHECK(v <= 1.0);
              CHECK(v == doctest::Approx(oracle.coverage(desc.object_type, desc.activity)).epsilon(1e-12));
              break;
            }
            default: break;
          }
        }
        // object counts never decrease along the prefix
        if (!prev_counts.empty()) {
          for (std::size_t i = 0; i < counts.size(); ++i) CHECK(counts[i] >= prev_counts[i]);
        }
        prev_counts = std::move(counts);
      }
    }
  }
}

TEST_CASE("the numeric aggregate function is configurable") {
  const auto view = requisition_view(UnfoldMode::object_centric_aggregated);
  const Trace& rq1 = fixtures::trace_of(view, "rq1");
  // orders seen through e11: o1=100, o2=200, o4=600
  CHECK(aggregate_numeric(view, rq1, 8, "order_price", "Order", AggregateFn::min) ==
        AttributeValue::number(100));
  CHECK(aggregate_numeric(view, rq1, 8, "order_price", "Order", AggregateFn::max) ==
        AttributeValue::number(600));
  CHECK(aggregate_numeric(view, rq1, 8, "order_price", "Order", AggregateFn::sum) ==
        AttributeValue::number(900));

  SUBCASE("the schema names the configured function") {
    EncodeOptions options;
    options.aggregate_fn = AggregateFn::sum;
    const FeatureSchema schema = build_schema(view, options);
    CHECK(schema.index_of("sum:order_price").has_value());
    CHECK_FALSE(schema.index_of("mean:order_price").has_value());
  }
}

TEST_CASE("categorical ratios sum to one once any value is observed") {
  const auto view = requisition_view(UnfoldMode::object_centric_aggregated);
  const FeatureSchema schema = build_schema(view);
  for (const auto& trace : view.traces) {
    for (std::size_t len = 1; len <= trace.length(); ++len) {
      const auto x = encode_prefix(view, trace, len, schema);
      std::map<std::string, double> totals;
      for (std::size_t f = 0; f < schema.size(); ++f) {
        if (schema.features[f].source == FeatureSource::aggregate_categorical_ratio) {
          totals[schema.features[f].attribute] += x[f].as_number();
        }
      }
      for (const auto& [attr, total] : totals) {
        const bool zero = std::abs(total) < 1e-12;
        const bool one = std::abs(total - 1.0) < 1e-9;
        CHECK((zero || one));
      }
    }
  }
}

TEST_CASE("a single related object aggregates to its latest value") {
  const auto view = requisition_view(UnfoldMode::object_centric_aggregated);
  const Trace& rq2 = fixtures::trace_of(view, "rq2");
  std::size_t len_e7 = 0;
  for (std::size_t i = 0; i < rq2.length(); ++i) {
    if (view.trace_event(rq2, i).id == "e7") len_e7 = i + 1;
    if (len_e7) break;
  }
  REQUIRE(len_e7 > 0);
  const auto oracle = oracles::prefix_oracle(view, rq2, len_e7);
  const auto latest = aggregate_numeric(view, rq2, len_e7, "order_price", "Order");
  const auto expected = oracle.numeric_mean("order_price", "Order");
  if (oracle.object_count("Order") == 1) {
    REQUIRE(expected.has_value());
    CHECK(latest == AttributeValue::number(*expected));
  }
  CHECK(latest.is_number());
}
