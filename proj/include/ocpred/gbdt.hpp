#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocpred/core.hpp"
#include "ocpred/detail/parallel.hpp"
#include "ocpred/detail/rng.hpp"
#include "ocpred/encode.hpp"

namespace ocpred {

enum class Loss { least_squares, absolute, logistic };

inline const char* loss_name(Loss l) {
  switch (l) {
    case Loss::least_squares: return "least-squares";
    case Loss::absolute: return "absolute";
    case Loss::logistic: return "logistic";
  }
  return "?";
}

inline std::optional<Loss> loss_from_name(std::string_view name) {
  if (name == "least-squares") return Loss::least_squares;
  if (name == "absolute") return Loss::absolute;
  if (name == "logistic") return Loss::logistic;
  return std::nullopt;
}

struct GbdtConfig {
  int n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 20;
  Loss loss = Loss::least_squares;
  std::uint64_t seed = 0;
  std::string categorical_strategy = "target-mean-order";
  int early_stopping_patience = 30;

  void check() const {
    if (n_trees < 0) throw_data("gbdt: n_trees must be >= 0");
    if (!(learning_rate > 0.0) || learning_rate > 1.0) throw_data("gbdt: learning_rate must lie in (0, 1]");
    if (max_depth < 1) throw_data("gbdt: max_depth must be >= 1");
    if (min_samples_leaf < 1) throw_data("gbdt: min_samples_leaf must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Trees. Numeric splits send x <= threshold left and missing values to the
// learned default side; categorical splits hold the sorted code set going
// left, with unseen codes falling right.
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::vector<int> left_codes;
  bool missing_left = false;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> categories;  // sorted; code = position

  int code_of(std::string_view value) const {
    auto it = std::lower_bound(categories.begin(), categories.end(), value);
    if (it == categories.end() || *it != value) return -1;
    return static_cast<int>(it - categories.begin());
  }
};

struct EncodedRow {
  std::vector<double> numeric;  // NaN = missing; categorical slots unused
  std::vector<int> code;        // -1 = unseen/missing; numeric slots unused
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double eval(const EncodedRow& row) const {
    std::size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const TreeNode& n = nodes[at];
      const auto f = static_cast<std::size_t>(n.feature);
      bool go_left;
      if (n.left_codes.empty()) {
        const double v = row.numeric[f];
        go_left = std::isnan(v) ? n.missing_left : v <= n.threshold;
      } else {
        go_left = std::binary_search(n.left_codes.begin(), n.left_codes.end(), row.code[f]);
      }
      at = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return nodes[at].value;
  }
};

class GbdtModel {
 public:
  double base_value = 0.0;
  Loss loss = Loss::least_squares;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<FeatureMeta> features;
  std::string schema_fingerprint;
  GbdtConfig config;
  int best_iteration = 0;
  bool degenerate = false;  // single-class target: constant predictor

  bool is_classification() const { return loss == Loss::logistic; }

  EncodedRow encode_row(std::span<const AttributeValue> x) const {
    if (x.size() != features.size()) throw_data("predict: row width does not match the model schema");
    EncodedRow row;
    row.numeric.assign(features.size(), std::numeric_limits<double>::quiet_NaN());
    row.code.assign(features.size(), -1);
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].kind == FeatureKind::numeric) {
        if (x[i].is_number()) row.numeric[i] = x[i].as_number();
      } else {
        const std::string value = x[i].is_missing() ? std::string(kMissingCategory) : x[i].display();
        row.code[i] = features[i].code_of(value);
      }
    }
    return row;
  }

  double predict_raw(const EncodedRow& row) const {
    double sum = base_value;
    for (const auto& tree : trees) sum += learning_rate * tree.eval(row);
    return sum;
  }

  // Regression value, or positive-class probability under logistic loss.
  double predict(std::span<const AttributeValue> x) const {
    const double raw = predict_raw(encode_row(x));
    return loss == Loss::logistic ? 1.0 / (1.0 + std::exp(-raw)) : raw;
  }

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

inline double mae(std::span<const double> predictions, std::span<const double> actuals) {
  if (predictions.size() != actuals.size()) throw_data("mae: length mismatch");
  if (predictions.empty()) throw_data("mae: empty input");
  double total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::abs(predictions[i] - actuals[i]);
  return total / static_cast<double>(predictions.size());
}

inline double f1(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
  if (predicted.size() != actual.size()) throw_data("f1: length mismatch");
  if (predicted.empty()) throw_data("f1: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && actual[i]) ++tp;
    else if (predicted[i] && !actual[i]) ++fp;
    else if (!predicted[i] && actual[i]) ++fn;
  }
  const double denom = 2.0 * static_cast<double>(tp) + static_cast<double>(fp) + static_cast<double>(fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(tp) / denom;
}

// ---------------------------------------------------------------------------
// Case-level split: all prefixes of a trace land in one partition. Two thirds
// of the cases go to train+validation, the rest to test; 20% of the former
// becomes the validation set. Seeded shuffle, same seed = same partitions.
// ---------------------------------------------------------------------------

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
};

inline SplitResult split_dataset(const Dataset& dataset, std::uint64_t seed) {
  std::vector<std::string> cases;
  std::set<std::string> seen;
  for (const auto& row : dataset.rows) {
    if (seen.insert(row.case_id).second) cases.push_back(row.case_id);
  }
  const std::size_t n = cases.size();
  if (n < 3) throw_data("split: need at least 3 cases, got " + std::to_string(n));

  detail::Rng rng(seed);
  rng.shuffle(cases);

  auto clamp_size = [](long long v, long long lo, long long hi) {
    return static_cast<std::size_t>(std::max(lo, std::min(hi, v)));
  };
  const std::size_t n_trainval =
      clamp_size(std::llround(static_cast<double>(n) * 2.0 / 3.0), 1, static_cast<long long>(n) - 1);
  if (n_trainval < 2) throw_data("split: too few cases to carve a validation set");
  const std::size_t n_val = clamp_size(std::llround(static_cast<double>(n_trainval) * 0.2), 1,
                                       static_cast<long long>(n_trainval) - 1);

  std::map<std::string, int> part;  // 0 train, 1 validation, 2 test
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_trainval - n_val) part[cases[i]] = 0;
    else if (i < n_trainval) part[cases[i]] = 1;
    else part[cases[i]] = 2;
  }

  SplitResult out;
  out.train.schema = out.validation.schema = out.test.schema = dataset.schema;
  out.train.classification = out.validation.classification = out.test.classification = dataset.classification;
  for (const auto& row : dataset.rows) {
    switch (part.at(row.case_id)) {
      case 0: out.train.rows.push_back(row); break;
      case 1: out.validation.rows.push_back(row); break;
      default: out.test.rows.push_back(row); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

namespace detail {

struct TrainMatrix {
  std::vector<FeatureMeta> features;
  // column-major values
  std::vector<std::vector<double>> numeric;  // per feature (numeric kind)
  std::vector<std::vector<int>> codes;       // per feature (categorical kind)
  std::vector<double> y;
  std::size_t n_rows = 0;

  // presorted row order per numeric feature (missing rows excluded)
  std::vector<std::vector<std::uint32_t>> sorted_rows;
  std::vector<std::vector<std::uint32_t>> missing_rows;
};

inline std::vector<FeatureMeta> feature_metadata(const Dataset& dataset) {
  std::vector<FeatureMeta> metas;
  metas.reserve(dataset.schema.size());
  for (std::size_t f = 0; f < dataset.schema.size(); ++f) {
    FeatureMeta meta;
    meta.name = dataset.schema.features[f].name;
    meta.kind = dataset.schema.features[f].kind == FeatureKind::numeric ? FeatureKind::numeric
                                                                        : FeatureKind::categorical;
    if (meta.kind == FeatureKind::categorical) {
      std::set<std::string> values;
      for (const auto& row : dataset.rows) {
        const AttributeValue& v = row.x[f];
        values.insert(v.is_missing() ? std::string(kMissingCategory) : v.display());
      }
      meta.categories.assign(values.begin(), values.end());
    }
    metas.push_back(std::move(meta));
  }
  return metas;
}

inline TrainMatrix build_matrix(const Dataset& dataset, const std::vector<FeatureMeta>& metas) {
  TrainMatrix m;
  m.features = metas;
  m.n_rows = dataset.rows.size();
  const std::size_t n_features = metas.size();
  m.numeric.resize(n_features);
  m.codes.resize(n_features);
  m.sorted_rows.resize(n_features);
  m.missing_rows.resize(n_features);
  m.y.reserve(m.n_rows);
  for (const auto& row : dataset.rows) {
    if (!row.y) throw_data("gbdt: dataset contains unlabeled rows");
    m.y.push_back(*row.y);
  }
  for (std::size_t f = 0; f < n_features; ++f) {
    if (metas[f].kind == FeatureKind::numeric) {
      auto& col = m.numeric[f];
      col.resize(m.n_rows);
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        const AttributeValue& v = dataset.rows[r].x[f];
        col[r] = v.is_number() ? v.as_number() : std::numeric_limits<double>::quiet_NaN();
      }
      auto& order = m.sorted_rows[f];
      auto& missing = m.missing_rows[f];
      for (std::uint32_t r = 0; r < m.n_rows; ++r) {
        if (std::isnan(col[r])) missing.push_back(r);
        else order.push_back(r);
      }
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (col[a] != col[b]) return col[a] < col[b];
        return a < b;
      });
    } else {
      auto& col = m.codes[f];
      col.resize(m.n_rows);
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        const AttributeValue& v = dataset.rows[r].x[f];
        const std::string value = v.is_missing() ? std::string(kMissingCategory) : v.display();
        col[r] = metas[f].code_of(value);
      }
    }
  }
  return m;
}

struct CandidateSplit {
  double gain = 0.0;
  bool valid = false;
  double threshold = 0.0;
  std::vector<int> left_codes;
  bool missing_left = false;
};

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t count = 0;
};

inline double leaf_objective(double g, double h) { return h > 1e-12 ? g * g / h : 0.0; }

// split gain relative to keeping the node whole
inline double split_gain(const NodeStats& left, const NodeStats& right, const NodeStats& total) {
  return leaf_objective(left.g, left.h) + leaf_objective(right.g, right.h) -
         leaf_objective(total.g, total.h);
}

}  // namespace detail

inline GbdtModel fit_gbdt(const Dataset& train, const Dataset* validation, const GbdtConfig& config,
                          int workers = 1) {
  config.check();
  if (train.rows.empty()) throw_data("gbdt: empty training set");
  const Loss loss = train.classification ? Loss::logistic : config.loss;

  const auto metas = detail::feature_metadata(train);
  detail::TrainMatrix m = detail::build_matrix(train, metas);
  const std::size_t n = m.n_rows;
  const std::size_t n_features = metas.size();

  GbdtModel model;
  model.loss = loss;
  model.learning_rate = config.learning_rate;
  model.features = metas;
  model.schema_fingerprint = train.schema.fingerprint();
  model.config = config;
  model.config.loss = loss;

  // base value: mean target, or log-odds of the positive rate
  double mean_y = 0.0;
  for (double v : m.y) mean_y += v;
  mean_y /= static_cast<double>(n);
  if (loss == Loss::logistic) {
    const double p = std::clamp(mean_y, 1e-6, 1.0 - 1e-6);
    model.base_value = std::log(p / (1.0 - p));
    bool single_class = true;
    for (double v : m.y) {
      if (v != m.y.front()) {
        single_class = false;
        break;
      }
    }
    if (single_class) {
      model.degenerate = true;  // constant predictor
      model.best_iteration = 0;
      return model;
    }
  } else {
    model.base_value = mean_y;
  }

  std::vector<double> pred(n, model.base_value);
  std::vector<double> grad(n), hess(n);
  auto refresh_gradients = [&] {
    switch (loss) {
      case Loss::least_squares:
        for (std::size_t i = 0; i < n; ++i) {
          grad[i] = pred[i] - m.y[i];
          hess[i] = 1.0;
        }
        break;
      case Loss::absolute:
        for (std::size_t i = 0; i < n; ++i) {
          grad[i] = pred[i] > m.y[i] ? 1.0 : (pred[i] < m.y[i] ? -1.0 : 0.0);
          hess[i] = 1.0;
        }
        break;
      case Loss::logistic:
        for (std::size_t i = 0; i < n; ++i) {
          const double p = 1.0 / (1.0 + std::exp(-pred[i]));
          grad[i] = p - m.y[i];
          hess[i] = std::max(p * (1.0 - p), 1e-12);
        }
        break;
    }
  };

  // validation bookkeeping
  std::vector<EncodedRow> val_rows;
  std::vector<double> val_pred;
  std::vector<double> val_y;
  if (validation && !validation->rows.empty()) {
    val_rows.reserve(validation->rows.size());
    for (const auto& row : validation->rows) {
      val_rows.push_back(model.encode_row(row.x));
      val_y.push_back(*row.y);
    }
    val_pred.assign(val_rows.size(), model.base_value);
  }
  auto validation_loss = [&]() -> double {
    double total = 0;
    for (std::size_t i = 0; i < val_pred.size(); ++i) {
      if (loss == Loss::logistic) {
        const double p = std::clamp(1.0 / (1.0 + std::exp(-val_pred[i])), 1e-12, 1.0 - 1e-12);
        total += -(val_y[i] * std::log(p) + (1.0 - val_y[i]) * std::log(1.0 - p));
      } else {
        total += std::abs(val_pred[i] - val_y[i]);
      }
    }
    return total / static_cast<double>(val_pred.size());
  };

  const int msl = config.min_samples_leaf;
  std::vector<int> node_of(n, 0);
  double best_val = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  int since_best = 0;

  for (int iter = 0; iter < config.n_trees; ++iter) {
    refresh_gradients();
    RegressionTree tree;
    tree.nodes.push_back(TreeNode{});
    std::fill(node_of.begin(), node_of.end(), 0);
    std::vector<int> active{0};

    for (int depth = 0; depth < config.max_depth && !active.empty(); ++depth) {
      // slot lookup for this level
      std::vector<int> slot_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot_of[static_cast<std::size_t>(active[s])] = static_cast<int>(s);
      const std::size_t n_slots = active.size();

      std::vector<detail::NodeStats> totals(n_slots);
      for (std::size_t r = 0; r < n; ++r) {
        const int s = slot_of[static_cast<std::size_t>(node_of[r])];
        if (s < 0) continue;
        totals[static_cast<std::size_t>(s)].g += grad[r];
        totals[static_cast<std::size_t>(s)].h += hess[r];
        totals[static_cast<std::size_t>(s)].count += 1;
      }

      // best split per (feature, slot); written to fixed slots so the reduce
      // below is identical for any worker count
      std::vector<std::vector<detail::CandidateSplit>> by_feature(n_features);
      detail::parallel_for(n_features, workers, [&](std::size_t f) {
        auto& results = by_feature[f];
        results.assign(n_slots, detail::CandidateSplit{});
        if (metas[f].kind == FeatureKind::numeric) {
          const auto& col = m.numeric[f];
          std::vector<detail::NodeStats> miss(n_slots);
          for (const std::uint32_t r : m.missing_rows[f]) {
            const int s = slot_of[static_cast<std::size_t>(node_of[r])];
            if (s < 0) continue;
            miss[static_cast<std::size_t>(s)].g += grad[r];
            miss[static_cast<std::size_t>(s)].h += hess[r];
            miss[static_cast<std::size_t>(s)].count += 1;
          }
          struct Run {
            detail::NodeStats acc;
            double last_value = 0.0;
            bool any = false;
          };
          std::vector<Run> runs(n_slots);
          auto consider = [&](std::size_t s, double threshold) {
            const Run& run = runs[s];
            const detail::NodeStats& total = totals[s];
            const detail::NodeStats& ms = miss[s];
            detail::NodeStats nonmiss_left = run.acc;
            // missing right
            {
              detail::NodeStats left = nonmiss_left;
              detail::NodeStats right{total.g - left.g, total.h - left.h, total.count - left.count};
              if (left.count >= static_cast<std::uint32_t>(msl) &&
                  right.count >= static_cast<std::uint32_t>(msl)) {
                const double gain = detail::split_gain(left, right, total);
                auto& best = results[s];
                if (!best.valid || gain > best.gain) {
                  best = {gain, true, threshold, {}, false};
                }
              }
            }
            // missing left
            if (ms.count > 0) {
              detail::NodeStats left{nonmiss_left.g + ms.g, nonmiss_left.h + ms.h,
                                     nonmiss_left.count + ms.count};
              detail::NodeStats right{totals[s].g - left.g, totals[s].h - left.h,
                                      totals[s].count - left.count};
              if (left.count >= static_cast<std::uint32_t>(msl) &&
                  right.count >= static_cast<std::uint32_t>(msl)) {
                const double gain = detail::split_gain(left, right, totals[s]);
                auto& best = results[s];
                if (!best.valid || gain > best.gain) {
                  best = {gain, true, threshold, {}, true};
                }
              }
            }
          };
          for (const std::uint32_t r : m.sorted_rows[f]) {
            const int s_raw = slot_of[static_cast<std::size_t>(node_of[r])];
            if (s_raw < 0) continue;
            const auto s = static_cast<std::size_t>(s_raw);
            const double v = col[r];
            if (runs[s].any && v != runs[s].last_value) {
              consider(s, (runs[s].last_value + v) / 2.0);
            }
            runs[s].acc.g += grad[r];
            runs[s].acc.h += hess[r];
            runs[s].acc.count += 1;
            runs[s].last_value = v;
            runs[s].any = true;
          }
        } else {
          const auto& col = m.codes[f];
          const std::size_t n_codes = metas[f].categories.size();
          if (n_codes < 2) return;
          std::vector<detail::NodeStats> stats(n_slots * n_codes);
          for (std::size_t r = 0; r < n; ++r) {
            const int s = slot_of[static_cast<std::size_t>(node_of[r])];
            if (s < 0 || col[r] < 0) continue;
            auto& st = stats[static_cast<std::size_t>(s) * n_codes + static_cast<std::size_t>(col[r])];
            st.g += grad[r];
            st.h += hess[r];
            st.count += 1;
          }
          for (std::size_t s = 0; s < n_slots; ++s) {
            std::vector<int> present;
            for (std::size_t c = 0; c < n_codes; ++c) {
              if (stats[s * n_codes + c].count > 0) present.push_back(static_cast<int>(c));
            }
            if (present.size() < 2) continue;
            // order categories by node target mean, then scan prefixes
            std::sort(present.begin(), present.end(), [&](int a, int b) {
              const auto& sa = stats[s * n_codes + static_cast<std::size_t>(a)];
              const auto& sb = stats[s * n_codes + static_cast<std::size_t>(b)];
              const double ma = -sa.g / std::max(sa.h, 1e-12);
              const double mb = -sb.g / std::max(sb.h, 1e-12);
              if (ma != mb) return ma < mb;
              return a < b;
            });
            detail::NodeStats left;
            for (std::size_t j = 0; j + 1 < present.size(); ++j) {
              const auto& st = stats[s * n_codes + static_cast<std::size_t>(present[j])];
              left.g += st.g;
              left.h += st.h;
              left.count += st.count;
              detail::NodeStats right{totals[s].g - left.g, totals[s].h - left.h,
                                      totals[s].count - left.count};
              if (left.count < static_cast<std::uint32_t>(msl) ||
                  right.count < static_cast<std::uint32_t>(msl)) {
                continue;
              }
              const double gain = detail::split_gain(left, right, totals[s]);
              auto& best = results[s];
              if (!best.valid || gain > best.gain) {
                std::vector<int> codes(present.begin(), present.begin() + static_cast<long>(j) + 1);
                std::sort(codes.begin(), codes.end());
                best = {gain, true, 0.0, std::move(codes), false};
              }
            }
          }
        }
      });

      // deterministic reduce: feature order breaks ties
      struct Chosen {
        detail::CandidateSplit split;
        int feature = -1;
      };
      std::vector<Chosen> chosen(n_slots);
      for (std::size_t f = 0; f < n_features; ++f) {
        for (std::size_t s = 0; s < n_slots; ++s) {
          const auto& cand = by_feature[f][s];
          if (!cand.valid) continue;
          if (chosen[s].feature < 0 || cand.gain > chosen[s].split.gain) {
            chosen[s] = {cand, static_cast<int>(f)};
          }
        }
      }

      std::vector<int> next_active;
      for (std::size_t s = 0; s < n_slots; ++s) {
        const int node_id = active[s];
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        if (chosen[s].feature < 0 || chosen[s].split.gain <= 1e-12) {
          node.value = totals[s].h > 1e-12 ? -totals[s].g / totals[s].h : 0.0;
          continue;
        }
        node.feature = chosen[s].feature;
        node.threshold = chosen[s].split.threshold;
        node.left_codes = chosen[s].split.left_codes;
        node.missing_left = chosen[s].split.missing_left;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        next_active.push_back(node.left);
        next_active.push_back(node.right);
      }

      // reassign rows of split nodes
      for (std::size_t r = 0; r < n; ++r) {
        const int node_id = node_of[r];
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        if (node.is_leaf()) continue;
        bool go_left;
        if (node.left_codes.empty()) {
          const double v = m.numeric[static_cast<std::size_t>(node.feature)][r];
          go_left = std::isnan(v) ? node.missing_left : v <= node.threshold;
        } else {
          const int c = m.codes[static_cast<std::size_t>(node.feature)][r];
          go_left = std::binary_search(node.left_codes.begin(), node.left_codes.end(), c);
        }
        node_of[r] = go_left ? node.left : node.right;
      }
      active = std::move(next_active);
    }

    // leftover active nodes at the depth limit become leaves
    if (!active.empty()) {
      std::vector<detail::NodeStats> totals(tree.nodes.size());
      for (std::size_t r = 0; r < n; ++r) {
        auto& st = totals[static_cast<std::size_t>(node_of[r])];
        st.g += grad[r];
        st.h += hess[r];
        st.count += 1;
      }
      for (const int node_id : active) {
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        const auto& st = totals[static_cast<std::size_t>(node_id)];
        node.value = st.h > 1e-12 ? -st.g / st.h : 0.0;
      }
    }

    // absolute loss: leaves take the median residual instead of the mean step
    if (loss == Loss::absolute) {
      std::map<int, std::vector<double>> residuals;
      for (std::size_t r = 0; r < n; ++r) residuals[node_of[r]].push_back(m.y[r] - pred[r]);
      for (auto& [node_id, values] : residuals) {
        std::sort(values.begin(), values.end());
        const std::size_t k = values.size();
        const double median = k % 2 ? values[k / 2] : (values[k / 2 - 1] + values[k / 2]) / 2.0;
        tree.nodes[static_cast<std::size_t>(node_id)].value = median;
      }
    }

    for (std::size_t r = 0; r < n; ++r) {
      pred[r] += config.learning_rate * tree.nodes[static_cast<std::size_t>(node_of[r])].value;
    }
    model.trees.push_back(std::move(tree));

    if (!val_rows.empty()) {
      for (std::size_t i = 0; i < val_rows.size(); ++i) {
        val_pred[i] += config.learning_rate * model.trees.back().eval(val_rows[i]);
      }
      const double vl = validation_loss();
      if (vl < best_val - 1e-12) {
        best_val = vl;
        best_iter = iter + 1;
        since_best = 0;
      } else if (++since_best >= config.early_stopping_patience) {
        break;
      }
    } else {
      best_iter = iter + 1;
    }
  }

  if (!val_rows.empty()) model.trees.resize(static_cast<std::size_t>(best_iter));
  model.best_iteration = static_cast<int>(model.trees.size());
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation and grid search.
// ---------------------------------------------------------------------------

inline std::vector<double> predict_dataset(const GbdtModel& model, const Dataset& dataset) {
  std::vector<double> out;
  out.reserve(dataset.rows.size());
  for (const auto& row : dataset.rows) out.push_back(model.predict(row.x));
  return out;
}

// MAE for regression, 1 - F1 at the 0.5 threshold for classification.
inline double evaluation_metric(const GbdtModel& model, const Dataset& dataset) {
  if (dataset.rows.empty()) throw_data("evaluate: empty dataset");
  const auto predictions = predict_dataset(model, dataset);
  if (model.is_classification()) {
    std::vector<bool> pred_cls, actual_cls;
    pred_cls.reserve(predictions.size());
    actual_cls.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      pred_cls.push_back(predictions[i] >= 0.5);
      actual_cls.push_back(*dataset.rows[i].y >= 0.5);
    }
    return 1.0 - f1(pred_cls, actual_cls);
  }
  std::vector<double> actuals;
  actuals.reserve(dataset.rows.size());
  for (const auto& row : dataset.rows) actuals.push_back(*row.y);
  return mae(predictions, actuals);
}

struct GridResult {
  GbdtConfig best_config;
  GbdtModel model;
  double validation_metric = 0.0;
};

// Picks the config minimizing the validation metric (first wins ties), then
// refits it on train+validation with the tree count the winner stopped at.
inline GridResult grid_search(const Dataset& train, const Dataset& validation,
                              std::span<const GbdtConfig> grid, int workers = 1) {
  if (grid.empty()) throw_data("grid search: empty grid");
  GridResult result;
  bool found = false;
  for (const auto& config : grid) {
    GbdtModel model = fit_gbdt(train, &validation, config, workers);
    const double metric = evaluation_metric(model, validation);
    if (!found || metric < result.validation_metric) {
      found = true;
      result.best_config = config;
      result.model = std::move(model);
      result.validation_metric = metric;
    }
  }
  Dataset combined;
  combined.schema = train.schema;
  combined.classification = train.classification;
  combined.rows = train.rows;
  combined.rows.insert(combined.rows.end(), validation.rows.begin(), validation.rows.end());
  GbdtConfig refit = result.best_config;
  refit.n_trees = std::max(result.model.best_iteration, 0);
  result.model = fit_gbdt(combined, nullptr, refit, workers);
  result.model.config = result.best_config;
  return result;
}

// ---------------------------------------------------------------------------
// Versioned JSON serialization.
// ---------------------------------------------------------------------------

inline nlohmann::json GbdtModel::to_json() const {
  nlohmann::json trees_json = nlohmann::json::array();
  for (const auto& tree : trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      nlohmann::json j;
      j["f"] = n.feature;
      if (!n.is_leaf()) {
        if (n.left_codes.empty()) j["thr"] = n.threshold;
        else j["codes"] = n.left_codes;
        j["miss_left"] = n.missing_left;
        j["l"] = n.left;
        j["r"] = n.right;
      } else {
        j["v"] = n.value;
      }
      nodes.push_back(std::move(j));
    }
    trees_json.push_back(nlohmann::json{{"nodes", std::move(nodes)}});
  }
  nlohmann::json features_json = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json j;
    j["name"] = f.name;
    j["kind"] = f.kind == FeatureKind::numeric ? "numeric" : "categorical";
    if (!f.categories.empty()) j["categories"] = f.categories;
    features_json.push_back(std::move(j));
  }
  return nlohmann::json{{"format", "ocpred-gbdt"},
                        {"version", 1},
                        {"loss", loss_name(loss)},
                        {"base_value", base_value},
                        {"learning_rate", learning_rate},
                        {"schema_fingerprint", schema_fingerprint},
                        {"best_iteration", best_iteration},
                        {"degenerate", degenerate},
                        {"config",
                         {{"n_trees", config.n_trees},
                          {"max_depth", config.max_depth},
                          {"learning_rate", config.learning_rate},
                          {"min_samples_leaf", config.min_samples_leaf},
                          {"loss", loss_name(config.loss)},
                          {"seed", config.seed},
                          {"categorical_strategy", config.categorical_strategy},
                          {"early_stopping_patience", config.early_stopping_patience}}},
                        {"features", std::move(features_json)},
                        {"trees", std::move(trees_json)}};
}

inline GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "ocpred-gbdt") throw_parse("model json: unknown format");
  GbdtModel model;
  model.loss = loss_from_name(j.at("loss").get<std::string>()).value_or(Loss::least_squares);
  model.base_value = j.at("base_value").get<double>();
  model.learning_rate = j.at("learning_rate").get<double>();
  model.schema_fingerprint = j.value("schema_fingerprint", std::string());
  model.best_iteration = j.value("best_iteration", 0);
  model.degenerate = j.value("degenerate", false);
  if (j.contains("config")) {
    const auto& c = j.at("config");
    model.config.n_trees = c.value("n_trees", 200);
    model.config.max_depth = c.value("max_depth", 6);
    model.config.learning_rate = c.value("learning_rate", 0.1);
    model.config.min_samples_leaf = c.value("min_samples_leaf", 20);
    model.config.loss = loss_from_name(c.value("loss", "least-squares")).value_or(Loss::least_squares);
    model.config.seed = c.value("seed", 0ull);
    model.config.categorical_strategy = c.value("categorical_strategy", "target-mean-order");
    model.config.early_stopping_patience = c.value("early_stopping_patience", 30);
  }
  for (const auto& fj : j.at("features")) {
    FeatureMeta meta;
    meta.name = fj.at("name").get<std::string>();
    meta.kind = fj.at("kind").get<std::string>() == "numeric" ? FeatureKind::numeric
                                                              : FeatureKind::categorical;
    if (fj.contains("categories")) meta.categories = fj.at("categories").get<std::vector<std::string>>();
    model.features.push_back(std::move(meta));
  }
  for (const auto& tj : j.at("trees")) {
    RegressionTree tree;
    for (const auto& nj : tj.at("nodes")) {
      TreeNode node;
      node.feature = nj.at("f").get<int>();
      if (node.feature >= 0) {
        if (nj.contains("thr")) node.threshold = nj.at("thr").get<double>();
        if (nj.contains("codes")) node.left_codes = nj.at("codes").get<std::vector<int>>();
        node.missing_left = nj.value("miss_left", false);
        node.left = nj.at("l").get<int>();
        node.right = nj.at("r").get<int>();
      } else {
        node.value = nj.value("v", 0.0);
      }
      tree.nodes.push_back(std::move(node));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace ocpred
