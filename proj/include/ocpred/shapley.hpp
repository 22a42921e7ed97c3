#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocpred/core.hpp"
#include "ocpred/detail/csv.hpp"
#include "ocpred/detail/rng.hpp"
#include "ocpred/encode.hpp"

namespace ocpred {

using Predictor = std::function<double(std::span<const AttributeValue>)>;

struct ShapleyVector {
  std::vector<double> phi;    // per-feature attribution in KPI units
  double base_value = 0.0;    // average prediction over the background
  double prediction = 0.0;
};

// ---------------------------------------------------------------------------
// Exact Shapley values by subset enumeration, with val(S) the marginal
// expectation: background rows with the features in S overwritten by x.
// ---------------------------------------------------------------------------

inline ShapleyVector exact_shapley(const Predictor& predict, std::span<const AttributeValue> x,
                                   const std::vector<std::vector<AttributeValue>>& background,
                                   int max_features = 12) {
  const std::size_t p = x.size();
  if (background.empty()) throw_data("shapley: empty background");
  if (p > static_cast<std::size_t>(max_features)) {
    throw_data("exact shapley is limited to " + std::to_string(max_features) +
               " features; use mc_shapley for wider models");
  }
  const std::size_t n_masks = std::size_t{1} << p;

  std::vector<double> val(n_masks, 0.0);
  std::vector<AttributeValue> work;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    double total = 0.0;
    for (const auto& bg : background) {
      work = bg;
      for (std::size_t i = 0; i < p; ++i) {
        if (mask & (std::size_t{1} << i)) work[i] = x[i];
      }
      total += predict(work);
    }
    val[mask] = total / static_cast<double>(background.size());
  }

  // weight for a coalition of size s: s! (p-s-1)! / p!
  std::vector<double> weight(p, 0.0);
  {
    std::vector<double> factorial(p + 1, 1.0);
    for (std::size_t i = 1; i <= p; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
    for (std::size_t s = 0; s < p; ++s) weight[s] = factorial[s] * factorial[p - s - 1] / factorial[p];
  }

  ShapleyVector out;
  out.phi.assign(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const int s = std::popcount(mask);
      out.phi[i] += weight[static_cast<std::size_t>(s)] * (val[mask | bit] - val[mask]);
    }
  }
  out.base_value = val[0];
  out.prediction = val[n_masks - 1];
  return out;
}

// ---------------------------------------------------------------------------
// Permutation-sampling estimate: for each sampled feature order and background
// row, accumulate the marginal contribution of x_i when added after its
// predecessors. Unbiased, and the per-permutation telescoping keeps
// sum(phi) = prediction - base exactly.
// ---------------------------------------------------------------------------

inline ShapleyVector mc_shapley(const Predictor& predict, std::span<const AttributeValue> x,
                                const std::vector<std::vector<AttributeValue>>& background,
                                int n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) throw_data("mc_shapley: n_permutations must be >= 1");
  if (background.empty()) throw_data("mc_shapley: empty background");
  const std::size_t p = x.size();

  detail::Rng rng(seed);
  std::vector<std::size_t> order(p);
  std::vector<AttributeValue> work;
  ShapleyVector out;
  out.phi.assign(p, 0.0);
  double base_total = 0.0;

  for (int perm = 0; perm < n_permutations; ++perm) {
    const auto bg_index =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(background.size()) - 1));
    for (std::size_t i = 0; i < p; ++i) order[i] = i;
    rng.shuffle(order);
    work = background[bg_index];
    double prev = predict(work);
    base_total += prev;
    for (const std::size_t idx : order) {
      work[idx] = x[idx];
      const double cur = predict(work);
      out.phi[idx] += cur - prev;
      prev = cur;
    }
  }
  for (auto& v : out.phi) v /= static_cast<double>(n_permutations);
  out.base_value = base_total / static_cast<double>(n_permutations);
  out.prediction = predict(x);
  return out;
}

// ---------------------------------------------------------------------------
// Feature discretization: a depth-limited single-feature regression stump
// forest; the split values become explanation bucket boundaries.
// ---------------------------------------------------------------------------

inline std::vector<double> discretize_feature(std::vector<std::pair<double, double>> samples,
                                              int max_buckets = 5) {
  if (max_buckets < 1) throw_data("discretize: max_buckets must be >= 1");
  if (samples.size() < 2) return {};
  std::sort(samples.begin(), samples.end());

  struct Segment {
    std::size_t lo, hi;         // [lo, hi) over the sorted samples
    double best_gain = 0.0;
    std::size_t best_cut = 0;   // split before this index
    double best_threshold = 0.0;
    bool has_split = false;
  };
  auto scan = [&](Segment& seg) {
    seg.has_split = false;
    seg.best_gain = 0.0;
    double total = 0.0;
    for (std::size_t i = seg.lo; i < seg.hi; ++i) total += samples[i].second;
    const auto n = static_cast<double>(seg.hi - seg.lo);
    double left_sum = 0.0;
    for (std::size_t i = seg.lo; i + 1 < seg.hi; ++i) {
      left_sum += samples[i].second;
      if (samples[i].first == samples[i + 1].first) continue;
      const double nl = static_cast<double>(i - seg.lo + 1);
      const double nr = n - nl;
      const double right_sum = total - left_sum;
      const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - total * total / n;
      if (!seg.has_split || gain > seg.best_gain) {
        seg.has_split = true;
        seg.best_gain = gain;
        seg.best_cut = i + 1;
        seg.best_threshold = (samples[i].first + samples[i + 1].first) / 2.0;
      }
    }
  };

  std::vector<Segment> leaves;
  Segment root{0, samples.size()};
  scan(root);
  leaves.push_back(root);
  std::vector<double> thresholds;
  while (static_cast<int>(leaves.size()) < max_buckets) {
    std::size_t best = leaves.size();
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!leaves[i].has_split || leaves[i].best_gain <= 1e-12) continue;
      if (best == leaves.size() || leaves[i].best_gain > leaves[best].best_gain ||
          (leaves[i].best_gain == leaves[best].best_gain &&
           leaves[i].best_threshold < leaves[best].best_threshold)) {
        best = i;
      }
    }
    if (best == leaves.size()) break;
    Segment seg = leaves[best];
    thresholds.push_back(seg.best_threshold);
    Segment left{seg.lo, seg.best_cut};
    Segment right{seg.best_cut, seg.hi};
    scan(left);
    scan(right);
    leaves[best] = left;
    leaves.push_back(right);
  }
  std::sort(thresholds.begin(), thresholds.end());
  return thresholds;
}

// ---------------------------------------------------------------------------
// Bucketed Shapley distributions for reporting.
// ---------------------------------------------------------------------------

struct ExplanationBucket {
  std::string feature;
  std::string label;
  std::vector<double> samples;
  double mean_phi = 0.0;
};

// Routes every (instance, feature) Shapley sample into one bucket: interval
// buckets for numeric features (given their thresholds), one bucket per value
// for categorical ones. Buckets come back sorted by |mean phi| descending.
inline std::vector<ExplanationBucket> aggregate_explanations(
    const FeatureSchema& schema, const std::vector<std::vector<AttributeValue>>& xs,
    const std::vector<ShapleyVector>& vectors,
    const std::map<std::string, std::vector<double>>& thresholds_by_feature) {
  if (xs.size() != vectors.size()) throw_data("explanations: instance/vector count mismatch");
  const std::size_t p = schema.size();

  auto numeric_label = [](const std::string& f, const std::vector<double>& w, std::size_t idx) {
    if (w.empty()) return f;
    if (idx == 0) return f + " < " + detail::fmt_double(w.front());
    if (idx == w.size()) return f + " >= " + detail::fmt_double(w.back());
    return detail::fmt_double(w[idx - 1]) + " <= " + f + " < " + detail::fmt_double(w[idx]);
  };

  std::map<std::pair<std::size_t, std::string>, ExplanationBucket> buckets;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    if (xs[r].size() != p || vectors[r].phi.size() != p) {
      throw_data("explanations: row width does not match the schema");
    }
    for (std::size_t f = 0; f < p; ++f) {
      const auto& desc = schema.features[f];
      const AttributeValue& v = xs[r][f];
      std::string label;
      if (desc.kind == FeatureKind::categorical) {
        label = desc.name + " = " + (v.is_missing() ? kMissingCategory : v.display());
      } else if (!v.is_number()) {
        label = desc.name + " missing";
      } else {
        auto it = thresholds_by_feature.find(desc.name);
        static const std::vector<double> kNone;
        const auto& w = it == thresholds_by_feature.end() ? kNone : it->second;
        const auto idx = static_cast<std::size_t>(
            std::upper_bound(w.begin(), w.end(), v.as_number()) - w.begin());
        label = numeric_label(desc.name, w, idx);
      }
      auto& bucket = buckets[{f, label}];
      bucket.feature = desc.name;
      bucket.label = label;
      bucket.samples.push_back(vectors[r].phi[f]);
    }
  }

  std::vector<ExplanationBucket> out;
  out.reserve(buckets.size());
  for (auto& [_, bucket] : buckets) {
    double total = 0.0;
    for (double s : bucket.samples) total += s;
    bucket.mean_phi = total / static_cast<double>(bucket.samples.size());
    out.push_back(std::move(bucket));
  }
  std::sort(out.begin(), out.end(), [](const ExplanationBucket& a, const ExplanationBucket& b) {
    const double ma = std::abs(a.mean_phi);
    const double mb = std::abs(b.mean_phi);
    if (ma != mb) return ma > mb;
    return a.label < b.label;
  });
  return out;
}

struct BoxStats {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
  std::size_t count = 0;
};

// Quartiles with linear interpolation between order statistics.
inline BoxStats box_stats(std::vector<double> samples) {
  BoxStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(samples.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return samples[lo] * (1.0 - frac) + samples[hi] * frac;
  };
  s.min = samples.front();
  s.max = samples.back();
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  double total = 0;
  for (double v : samples) total += v;
  s.mean = total / static_cast<double>(samples.size());
  return s;
}

inline std::string boxplot_csv(const std::vector<ExplanationBucket>& buckets, int top_k) {
  if (top_k < 1) throw_data("boxplot: top_k must be >= 1");
  std::string out;
  detail::append_csv_row(out, {"bucket", "min", "q1", "median", "q3", "max", "mean", "count"});
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), buckets.size());
  for (std::size_t i = 0; i < k; ++i) {
    const BoxStats s = box_stats(buckets[i].samples);
    detail::append_csv_row(out, {buckets[i].label, detail::fmt_double(s.min), detail::fmt_double(s.q1),
                                 detail::fmt_double(s.median), detail::fmt_double(s.q3),
                                 detail::fmt_double(s.max), detail::fmt_double(s.mean),
                                 std::to_string(s.count)});
  }
  return out;
}

struct LabeledBox {
  std::string label;
  BoxStats stats;
};

// Static SVG 1.1, horizontal boxes ordered as given, Tukey whiskers
// (clamped at 1.5 IQR beyond the quartiles).
inline std::string boxplot_svg_from_stats(const std::vector<LabeledBox>& boxes) {
  const std::size_t k = boxes.size();
  const int row_height = 34;
  const int label_width = 340;
  const int plot_width = 520;
  const int margin = 12;
  const int width = label_width + plot_width + 2 * margin;
  const int height = static_cast<int>(k) * row_height + 2 * margin + 20;

  std::vector<std::pair<double, double>> whiskers;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& box : boxes) {
    const BoxStats& s = box.stats;
    const double iqr = s.q3 - s.q1;
    const double wlo = std::max(s.min, s.q1 - 1.5 * iqr);
    const double whi = std::min(s.max, s.q3 + 1.5 * iqr);
    if (!any) {
      lo = wlo;
      hi = whi;
      any = true;
    } else {
      lo = std::min(lo, wlo);
      hi = std::max(hi, whi);
    }
    whiskers.emplace_back(wlo, whi);
  }
  lo = std::min(lo, 0.0);
  hi = std::max(hi, 0.0);
  if (!any || hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  auto sx = [&](double v) {
    return static_cast<double>(label_width + margin) +
           (v - lo) / (hi - lo) * static_cast<double>(plot_width);
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // zero axis
  svg += "<line x1=\"" + detail::fmt_double(sx(0)) + "\" y1=\"" + std::to_string(margin) + "\" x2=\"" +
         detail::fmt_double(sx(0)) + "\" y2=\"" + std::to_string(height - margin - 20) +
         "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < k; ++i) {
    const BoxStats& s = boxes[i].stats;
    const double cy = margin + static_cast<double>(i) * row_height + row_height / 2.0;
    const double box_h = row_height * 0.55;
    std::string label = boxes[i].label;
    for (auto& c : label) {
      if (c == '<') c = '(';
      if (c == '>') c = ')';
      if (c == '&') c = '+';
    }
    svg += "<text x=\"" + std::to_string(margin) + "\" y=\"" + detail::fmt_double(cy + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + label + "</text>\n";
    svg += "<line x1=\"" + detail::fmt_double(sx(whiskers[i].first)) + "\" y1=\"" + detail::fmt_double(cy) +
           "\" x2=\"" + detail::fmt_double(sx(whiskers[i].second)) + "\" y2=\"" + detail::fmt_double(cy) +
           "\" stroke=\"#444\"/>\n";
    svg += "<rect x=\"" + detail::fmt_double(sx(s.q1)) + "\" y=\"" + detail::fmt_double(cy - box_h / 2) +
           "\" width=\"" + detail::fmt_double(std::max(1.0, sx(s.q3) - sx(s.q1))) + "\" height=\"" +
           detail::fmt_double(box_h) + "\" fill=\"#7fb3d5\" stroke=\"#2c3e50\"/>\n";
    svg += "<line x1=\"" + detail::fmt_double(sx(s.median)) + "\" y1=\"" +
           detail::fmt_double(cy - box_h / 2) + "\" x2=\"" + detail::fmt_double(sx(s.median)) +
           "\" y2=\"" + detail::fmt_double(cy + box_h / 2) + "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
  }
  svg += "<text x=\"" + std::to_string(label_width + margin) + "\" y=\"" + std::to_string(height - margin) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fmt_double(lo) + "</text>\n";
  svg += "<text x=\"" + std::to_string(label_width + margin + plot_width - 40) + "\" y=\"" +
         std::to_string(height - margin) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
         detail::fmt_double(hi) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

inline std::string boxplot_svg(const std::vector<ExplanationBucket>& buckets, int top_k) {
  if (top_k < 1) throw_data("boxplot: top_k must be >= 1");
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k), buckets.size());
  std::vector<LabeledBox> boxes;
  boxes.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    boxes.push_back({buckets[i].label, box_stats(buckets[i].samples)});
  }
  return boxplot_svg_from_stats(boxes);
}

}  // namespace ocpred
