#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ocpred/core.hpp"
#include "ocpred/encode.hpp"

namespace ocpred {

enum class KpiKind {
  remaining_time,
  activity_occurrence,
  attribute_value_occurrence,
  path_time,
  attribute_delta,
};

inline const char* kpi_kind_name(KpiKind k) {
  switch (k) {
    case KpiKind::remaining_time: return "remaining-time";
    case KpiKind::activity_occurrence: return "activity-occurrence";
    case KpiKind::attribute_value_occurrence: return "attribute-value-occurrence";
    case KpiKind::path_time: return "path-time";
    case KpiKind::attribute_delta: return "attribute-delta";
  }
  return "?";
}

inline std::optional<KpiKind> kpi_kind_from_name(std::string_view name) {
  if (name == "remaining-time") return KpiKind::remaining_time;
  if (name == "activity-occurrence") return KpiKind::activity_occurrence;
  if (name == "attribute-value-occurrence") return KpiKind::attribute_value_occurrence;
  if (name == "path-time") return KpiKind::path_time;
  if (name == "attribute-delta") return KpiKind::attribute_delta;
  return std::nullopt;
}

struct KpiSpec {
  KpiKind kind = KpiKind::remaining_time;
  std::string activity;           // activity-occurrence
  std::string attribute;          // attribute-value-occurrence
  std::string value;              // attribute-value-occurrence
  std::string source_activity;    // path-time
  std::string target_activity;    // path-time, attribute-delta
  std::string due_attribute;      // attribute-delta
  std::string due_format = "%Y-%m-%d %H:%M";

  bool is_classification() const {
    return kind == KpiKind::activity_occurrence || kind == KpiKind::attribute_value_occurrence;
  }
};

// ---------------------------------------------------------------------------
// Durations are seconds; labels are reported in fractional days.
// ---------------------------------------------------------------------------

inline std::int64_t remaining_time(const SingleIdLog& log, const Trace& trace, std::size_t i) {
  if (i == 0 || i > trace.length()) throw_data("prefix index out of range");
  const Instant last = log.trace_event(trace, trace.length() - 1).timestamp;
  const Instant current = log.trace_event(trace, i - 1).timestamp;
  return last - current;
}

// Strict future: false at i == n even if the activity occurred earlier.
inline bool activity_occurrence(const SingleIdLog& log, const Trace& trace, std::size_t i,
                                const std::string& activity) {
  if (i == 0 || i > trace.length()) throw_data("prefix index out of range");
  for (std::size_t pos = i; pos < trace.length(); ++pos) {
    if (log.trace_event(trace, pos).activity == activity) return true;
  }
  return false;
}

inline bool attribute_value_occurrence(const SingleIdLog& log, const Trace& trace, std::size_t i,
                                       const std::string& attribute, const std::string& value) {
  if (i == 0 || i > trace.length()) throw_data("prefix index out of range");
  for (std::size_t pos = i; pos < trace.length(); ++pos) {
    const AttributeValue* v = log.trace_event(trace, pos).attr(attribute);
    if (v && v->display() == value) return true;
  }
  return false;
}

// Elapsed time from the first source occurrence to the last target occurrence;
// undefined when either is absent or the target closes before the source.
inline std::optional<std::int64_t> path_time(const SingleIdLog& log, const Trace& trace,
                                             const std::string& source_activity,
                                             const std::string& target_activity) {
  std::optional<Instant> first_source;
  std::optional<Instant> last_target;
  for (std::size_t pos = 0; pos < trace.length(); ++pos) {
    const EventRecord& e = log.trace_event(trace, pos);
    if (!first_source && e.activity == source_activity) first_source = e.timestamp;
    if (e.activity == target_activity) last_target = e.timestamp;
  }
  if (!first_source || !last_target) return std::nullopt;
  if (*last_target < *first_source) return std::nullopt;
  return *last_target - *first_source;
}

namespace detail {

inline std::optional<Instant> parse_due_value(const AttributeValue& v, const std::string& format) {
  if (v.is_number()) return static_cast<Instant>(v.as_number());  // epoch seconds
  if (v.is_text()) {
    auto t = parse_instant(v.as_text(), format);
    if (!t) t = parse_instant_any(v.as_text());
    return t;
  }
  return std::nullopt;
}

}  // namespace detail

// Signed mean, in days, of (event time - due value) over the target-activity
// events; negative means early. Undefined without any target occurrence.
inline std::optional<double> attribute_delta(const SingleIdLog& log, const Trace& trace,
                                             const std::string& target_activity,
                                             const std::string& due_attribute,
                                             const std::string& due_format = "%Y-%m-%d %H:%M") {
  double total = 0;
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < trace.length(); ++pos) {
    const EventRecord& e = log.trace_event(trace, pos);
    if (e.activity != target_activity) continue;
    const AttributeValue* due = e.attr(due_attribute);
    if (!due) continue;
    auto due_instant = detail::parse_due_value(*due, due_format);
    if (!due_instant) {
      throw_data("attribute-delta: event '" + e.id + "' has unparseable due value '" + due->display() + "'");
    }
    total += static_cast<double>(e.timestamp - *due_instant) / kSecondsPerDay;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Dataset labeling.
// ---------------------------------------------------------------------------

// Generic labeling hook: fn(trace, i) returns the label for prefix i of the
// trace, or nothing to drop that instance. Custom last-event KPIs (e.g. a
// satisfaction score recorded at completion) plug in here.
using LabelFn = std::function<std::optional<double>(const Trace&, std::size_t)>;

inline Dataset label_dataset_with(Dataset dataset, const SingleIdLog& log, const LabelFn& fn,
                                  bool classification = false) {
  std::map<std::string, const Trace*> by_case;
  for (const auto& t : log.traces) by_case[t.case_id] = &t;
  Dataset out;
  out.schema = dataset.schema;
  out.classification = classification;
  for (auto& row : dataset.rows) {
    auto it = by_case.find(row.case_id);
    if (it == by_case.end()) throw_data("labeling: no trace for case '" + row.case_id + "'");
    auto label = fn(*it->second, row.prefix_len);
    if (!label) continue;
    row.y = *label;
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline Dataset label_dataset(Dataset dataset, const SingleIdLog& log, const KpiSpec& spec) {
  switch (spec.kind) {
    case KpiKind::remaining_time:
      return label_dataset_with(std::move(dataset), log, [&](const Trace& t, std::size_t i) {
        return static_cast<double>(remaining_time(log, t, i)) / kSecondsPerDay;
      });
    case KpiKind::activity_occurrence:
      return label_dataset_with(
          std::move(dataset), log,
          [&](const Trace& t, std::size_t i) -> std::optional<double> {
            return activity_occurrence(log, t, i, spec.activity) ? 1.0 : 0.0;
          },
          true);
    case KpiKind::attribute_value_occurrence:
      return label_dataset_with(
          std::move(dataset), log,
          [&](const Trace& t, std::size_t i) -> std::optional<double> {
            return attribute_value_occurrence(log, t, i, spec.attribute, spec.value) ? 1.0 : 0.0;
          },
          true);
    case KpiKind::path_time:
      // Constant per trace; prefixes at or after the last target occurrence no
      // longer forecast anything and are dropped.
      return label_dataset_with(std::move(dataset), log,
                                [&](const Trace& t, std::size_t i) -> std::optional<double> {
                                  auto duration = path_time(log, t, spec.source_activity, spec.target_activity);
                                  if (!duration) return std::nullopt;
                                  std::size_t last_target = 0;
                                  for (std::size_t pos = 0; pos < t.length(); ++pos) {
                                    if (log.trace_event(t, pos).activity == spec.target_activity) {
                                      last_target = pos + 1;
                                    }
                                  }
                                  if (i >= last_target) return std::nullopt;
                                  return static_cast<double>(*duration) / kSecondsPerDay;
                                });
    case KpiKind::attribute_delta:
      return label_dataset_with(std::move(dataset), log,
                                [&](const Trace& t, std::size_t) -> std::optional<double> {
                                  return attribute_delta(log, t, spec.target_activity, spec.due_attribute,
                                                         spec.due_format);
                                });
  }
  throw_internal("unhandled KPI kind");
}

// Referenced activities/attributes must exist in the source log. Unfolded
// views may still lack them (a naive view can hide a related activity), which
// the occurrence KPIs answer with false rather than an error.
inline void validate_kpi_spec(const KpiSpec& spec, const ObjectCentricLog& log) {
  const std::set<std::string> activities = log.activities();
  std::set<std::string> attributes;
  for (const auto& [name, _] : log.attribute_schema) attributes.insert(name);
  auto need_activity = [&](const std::string& a, const char* role) {
    if (!activities.count(a)) {
      throw_validation(std::string("kpi: ") + role + " activity '" + a + "' does not occur in the log");
    }
  };
  switch (spec.kind) {
    case KpiKind::remaining_time: break;
    case KpiKind::activity_occurrence:
      need_activity(spec.activity, "target");
      break;
    case KpiKind::attribute_value_occurrence:
      if (!attributes.count(spec.attribute)) {
        throw_validation("kpi: attribute '" + spec.attribute + "' is not in the log schema");
      }
      break;
    case KpiKind::path_time:
      need_activity(spec.source_activity, "source");
      need_activity(spec.target_activity, "target");
      break;
    case KpiKind::attribute_delta:
      need_activity(spec.target_activity, "target");
      if (!attributes.count(spec.due_attribute)) {
        throw_validation("kpi: due attribute '" + spec.due_attribute + "' is not in the log schema");
      }
      break;
  }
}

}  // namespace ocpred
