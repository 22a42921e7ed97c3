#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ocpred/detail/rng.hpp"
#include "ocpred/gbdt.hpp"
#include "ocpred/shapley.hpp"

using namespace ocpred;

namespace {

std::vector<AttributeValue> numeric_row(const std::vector<double>& values) {
  std::vector<AttributeValue> row;
  for (double v : values) row.push_back(AttributeValue::number(v));
  return row;
}

std::vector<std::vector<AttributeValue>> numeric_background(
    const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<AttributeValue>> out;
  for (const auto& r : rows) out.push_back(numeric_row(r));
  return out;
}

double phi_sum(const ShapleyVector& sv) {
  return std::accumulate(sv.phi.begin(), sv.phi.end(), 0.0);
}

// zero-mean background on each feature
std::vector<std::vector<double>> symmetric_bg() {
  return {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}, {0, 0}, {0.5, -0.5}, {-0.5, 0.5}, {0, 0}};
}

}  // namespace

TEST_CASE("exact shapley on hand-checkable models") {
  SUBCASE("a constant model attributes nothing") {
    const Predictor constant = [](std::span<const AttributeValue>) { return 42.0; };
    const auto sv = exact_shapley(constant, numeric_row({3, 4}), numeric_background(symmetric_bg()));
    CHECK(sv.phi[0] == 0.0);
    CHECK(sv.phi[1] == 0.0);
    CHECK(sv.base_value == 42.0);
    CHECK(sv.prediction == 42.0);
  }

  SUBCASE("an additive model with zero-mean background splits by coordinate") {
    const Predictor add = [](std::span<const AttributeValue> x) {
      return x[0].as_number() + x[1].as_number();
    };
    const auto sv = exact_shapley(add, numeric_row({2.0, -1.5}), numeric_background(symmetric_bg()));
    CHECK(sv.phi[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sv.phi[1] == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(phi_sum(sv) == doctest::Approx(sv.prediction - sv.base_value).epsilon(1e-12));
  }

  SUBCASE("a single-feature model gets the whole payout") {
    const Predictor single = [](std::span<const AttributeValue> x) {
      return 3.0 * x[0].as_number();
    };
    const auto sv = exact_shapley(single, numeric_row({2.0}), numeric_background({{0.0}, {1.0}}));
    CHECK(sv.phi[0] == doctest::Approx(sv.prediction - sv.base_value).epsilon(1e-12));
  }

  SUBCASE("symmetric features with identical columns share the credit") {
    const Predictor sym = [](std::span<const AttributeValue> x) {
      auto g = [](double v) { return v * v + 2.0 * v; };
      return g(x[0].as_number()) + g(x[1].as_number());
    };
    std::vector<std::vector<double>> bg;
    for (double v : {-1.0, 0.0, 0.5, 2.0}) bg.push_back({v, v});  // identical columns
    const auto sv = exact_shapley(sym, numeric_row({1.5, 1.5}), numeric_background(bg));
    CHECK(sv.phi[0] == doctest::Approx(sv.phi[1]).epsilon(1e-12));
  }

  SUBCASE("feature arity above the cap is rejected with a pointer to mc") {
    const Predictor constant = [](std::span<const AttributeValue>) { return 0.0; };
    std::vector<double> wide(13, 0.0);
    CHECK_THROWS_WITH_AS(exact_shapley(constant, numeric_row(wide), numeric_background({wide})),
                         doctest::Contains("mc_shapley"), Error);
  }
}

TEST_CASE("tree models satisfy efficiency and the dummy property") {
  detail::Rng rng(31);
  FeatureSchema schema;
  schema.viewpoint_type = "T";
  for (int i = 0; i < 5; ++i) {
    schema.features.push_back({"x" + std::to_string(i), FeatureKind::numeric,
                               FeatureSource::activity_count, "", "", "", ""});
  }
  Dataset d;
  d.schema = schema;
  for (int i = 0; i < 300; ++i) {
    PrefixInstance row;
    row.case_id = "c" + std::to_string(i);
    row.prefix_len = 1;
    std::vector<double> values;
    for (int f = 0; f < 5; ++f) values.push_back(rng.uniform(-2, 2));
    values[4] = 1.0;  // constant: a guaranteed dummy
    for (double v : values) row.x.push_back(AttributeValue::number(v));
    row.y = std::sin(values[0]) + 0.5 * values[1] * values[2] + rng.normal(0, 0.05);
    d.rows.push_back(std::move(row));
  }
  GbdtConfig config;
  config.n_trees = 25;
  config.max_depth = 3;
  config.min_samples_leaf = 5;
  const GbdtModel model = fit_gbdt(d, nullptr, config);
  const Predictor predictor = [&](std::span<const AttributeValue> x) { return model.predict(x); };

  std::vector<std::vector<AttributeValue>> background;
  for (int i = 0; i < 64; ++i) background.push_back(d.rows[static_cast<std::size_t>(i * 4)].x);

  for (int i = 0; i < 20; ++i) {
    const auto& x = d.rows[static_cast<std::size_t>(i * 7)].x;
    const auto sv = exact_shapley(predictor, x, background);
    const double gap = std::abs(phi_sum(sv) - (sv.prediction - sv.base_value));
    const double scale = std::max(1.0, std::abs(sv.prediction - sv.base_value));
    CHECK(gap / scale < 1e-9);
    CHECK(sv.phi[4] == 0.0);  // constant feature never splits
  }
}

TEST_CASE("permutation sampling estimates the exact values") {
  const Predictor add = [](std::span<const AttributeValue> x) {
    double total = 0;
    for (const auto& v : x) total += v.as_number();
    return total;
  };
  detail::Rng rng(7);
  std::vector<std::vector<double>> bg_rows;
  for (int i = 0; i < 64; ++i) {
    std::vector<double> row;
    for (int f = 0; f < 4; ++f) row.push_back(rng.uniform(-1, 1));
    bg_rows.push_back(row);
  }
  const auto background = numeric_background(bg_rows);
  const auto x = numeric_row({2.0, -2.5, 3.0, 1.5});
  const auto exact = exact_shapley(add, x, background);

  SUBCASE("2000 permutations land within 5% of exact") {
    const auto mc = mc_shapley(add, x, background, 2000, 99);
    for (std::size_t f = 0; f < 4; ++f) {
      CHECK(std::abs(mc.phi[f] - exact.phi[f]) / std::abs(exact.phi[f]) < 0.05);
    }
    // telescoping keeps the efficiency identity exact
    CHECK(phi_sum(mc) == doctest::Approx(mc.prediction - mc.base_value).epsilon(1e-9));
  }

  SUBCASE("the estimate is seed-deterministic") {
    const auto a = mc_shapley(add, x, background, 50, 1234);
    const auto b = mc_shapley(add, x, background, 50, 1234);
    CHECK(a.phi == b.phi);
    const auto c = mc_shapley(add, x, background, 50, 4321);
    CHECK(a.phi != c.phi);
  }

  SUBCASE("error decreases with the permutation budget") {
    double err_by_budget[3] = {0, 0, 0};
    const int budgets[3] = {25, 200, 1600};
    for (int rep = 0; rep < 10; ++rep) {
      for (int b = 0; b < 3; ++b) {
        const auto mc = mc_shapley(add, x, background, budgets[b], 500 + static_cast<std::uint64_t>(rep));
        for (std::size_t f = 0; f < 4; ++f) err_by_budget[b] += std::abs(mc.phi[f] - exact.phi[f]);
      }
    }
    CHECK(err_by_budget[0] > err_by_budget[1]);
    CHECK(err_by_budget[1] > err_by_budget[2]);
  }

  SUBCASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(mc_shapley(add, x, background, 0, 1), Error);
    CHECK_THROWS_AS(mc_shapley(add, x, {}, 10, 1), Error);
    CHECK_THROWS_AS(exact_shapley(add, x, {}), Error);
  }
}

TEST_CASE("discretization splits where the label changes") {
  SUBCASE("step labels give one midpoint threshold") {
    const auto w = discretize_feature({{1, 0}, {2, 0}, {10, 1}, {11, 1}}, 5);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 6.0);
  }

  SUBCASE("constant feature yields no thresholds") {
    CHECK(discretize_feature({{5, 1}, {5, 2}, {5, 3}}, 5).empty());
  }

  SUBCASE("bucket budget caps the threshold count") {
    std::vector<std::pair<double, double>> monotone;
    for (int i = 0; i < 8; ++i) monotone.push_back({static_cast<double>(i), static_cast<double>(i)});
    const auto w = discretize_feature(monotone, 4);
    CHECK(w.size() <= 3);
    CHECK(!w.empty());
    CHECK(std::is_sorted(w.begin(), w.end()));
  }
}

TEST_CASE("explanation buckets route every sample exactly once") {
  FeatureSchema schema;
  schema.viewpoint_type = "T";
  schema.features.push_back(
      {"amount", FeatureKind::numeric, FeatureSource::activity_count, "", "", "", ""});
  schema.features.push_back(
      {"kind", FeatureKind::categorical, FeatureSource::last_event_activity, "", "", "", ""});

  std::vector<std::vector<AttributeValue>> xs;
  std::vector<ShapleyVector> vectors;
  detail::Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    const double amount = rng.uniform(0, 10);
    xs.push_back({AttributeValue::number(amount),
                  AttributeValue::text(i % 3 == 0 ? "expedited" : "standard")});
    ShapleyVector sv;
    sv.phi = {amount > 5 ? 4.0 : -1.0, i % 3 == 0 ? 2.0 : 0.1};
    vectors.push_back(sv);
  }
  const std::map<std::string, std::vector<double>> thresholds{{"amount", {5.0}}};
  const auto buckets = aggregate_explanations(schema, xs, vectors, thresholds);

  std::map<std::string, std::size_t> per_feature;
  for (const auto& bucket : buckets) per_feature[bucket.feature] += bucket.samples.size();
  CHECK(per_feature.at("amount") == 40);
  CHECK(per_feature.at("kind") == 40);

  SUBCASE("buckets are ordered by absolute mean attribution") {
    for (std::size_t i = 1; i < buckets.size(); ++i) {
      CHECK(std::abs(buckets[i - 1].mean_phi) >= std::abs(buckets[i].mean_phi) - 1e-12);
    }
    CHECK(buckets.front().label == "amount >= 5");
  }

  SUBCASE("a feature without thresholds pools its samples") {
    const auto pooled = aggregate_explanations(schema, xs, vectors, {});
    std::size_t amount_buckets = 0;
    for (const auto& bucket : pooled) {
      if (bucket.feature == "amount") ++amount_buckets;
    }
    CHECK(amount_buckets == 1);
  }

  SUBCASE("one vector and one feature make one bucket with one sample") {
    FeatureSchema tiny;
    tiny.viewpoint_type = "T";
    tiny.features.push_back({"f", FeatureKind::numeric, FeatureSource::activity_count, "", "", "", ""});
    ShapleyVector sv;
    sv.phi = {1.25};
    const auto single =
        aggregate_explanations(tiny, {{AttributeValue::number(3)}}, {sv}, {});
    REQUIRE(single.size() == 1);
    CHECK(single[0].samples.size() == 1);
    CHECK(single[0].mean_phi == 1.25);
  }
}

TEST_CASE("boxplot exports") {
  ExplanationBucket bucket;
  bucket.feature = "f";
  bucket.label = "f >= 1";
  bucket.samples = {1, 2, 3, 4, 5};
  bucket.mean_phi = 3;

  SUBCASE("quartiles use linear interpolation") {
    const BoxStats s = box_stats(bucket.samples);
    CHECK(s.q1 == 2.0);
    CHECK(s.median == 3.0);
    CHECK(s.q3 == 4.0);
    CHECK(s.min == 1.0);
    CHECK(s.max == 5.0);
    CHECK(s.mean == 3.0);
  }

  SUBCASE("csv lists label and order statistics") {
    const std::string csv = boxplot_csv({bucket}, 10);
    const auto table = detail::parse_csv(csv);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][0] == "bucket");
    CHECK(table.rows[1][0] == "f >= 1");
    CHECK(table.rows[1][7] == "5");
  }

  SUBCASE("top_k larger than the bucket count emits everything") {
    const std::string csv = boxplot_csv({bucket, bucket}, 50);
    CHECK(detail::parse_csv(csv).rows.size() == 3);
  }

  SUBCASE("empty bucket lists produce a header-only csv and an empty canvas") {
    CHECK(detail::parse_csv(boxplot_csv({}, 3)).rows.size() == 1);
    const std::string svg = boxplot_svg({}, 3);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<rect x=") == std::string::npos);  // no boxes drawn
  }

  SUBCASE("svg draws one box per bucket") {
    const std::string svg = boxplot_svg({bucket}, 3);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("f )= 1") != std::string::npos);  // label with angle brackets replaced
  }
}
