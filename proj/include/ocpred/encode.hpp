#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocpred/core.hpp"
#include "ocpred/detail/csv.hpp"

namespace ocpred {

enum class FeatureKind { numeric, categorical };

enum class FeatureSource {
  activity_count,
  last_event_attribute,
  last_event_activity,
  elapsed_time,
  aggregate_numeric,
  aggregate_categorical_ratio,
  object_count,
  activity_coverage,
};

inline const char* feature_source_name(FeatureSource s) {
  switch (s) {
    case FeatureSource::activity_count: return "activity-count";
    case FeatureSource::last_event_attribute: return "last-event-attribute";
    case FeatureSource::last_event_activity: return "last-event-activity";
    case FeatureSource::elapsed_time: return "elapsed-time";
    case FeatureSource::aggregate_numeric: return "aggregate-numeric";
    case FeatureSource::aggregate_categorical_ratio: return "aggregate-categorical-ratio";
    case FeatureSource::object_count: return "object-count";
    case FeatureSource::activity_coverage: return "activity-coverage";
  }
  return "?";
}

enum class AggregateFn { mean, min, max, sum };

inline const char* aggregate_fn_name(AggregateFn fn) {
  switch (fn) {
    case AggregateFn::mean: return "mean";
    case AggregateFn::min: return "min";
    case AggregateFn::max: return "max";
    case AggregateFn::sum: return "sum";
  }
  return "?";
}

inline std::optional<AggregateFn> aggregate_fn_from_name(std::string_view name) {
  if (name == "mean") return AggregateFn::mean;
  if (name == "min") return AggregateFn::min;
  if (name == "max") return AggregateFn::max;
  if (name == "sum") return AggregateFn::sum;
  return std::nullopt;
}

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  FeatureSource source = FeatureSource::activity_count;
  // evaluation payload; unused fields stay empty
  std::string activity;
  std::string attribute;
  std::string value;
  std::string object_type;
};

struct EncodeOptions {
  AggregateFn aggregate_fn = AggregateFn::mean;
};

struct FeatureSchema {
  std::vector<FeatureDescriptor> features;
  std::string viewpoint_type;
  UnfoldMode mode = UnfoldMode::object_centric;
  AggregateFn aggregate_fn = AggregateFn::mean;

  std::size_t size() const { return features.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].name == name) return i;
    }
    return std::nullopt;
  }

  std::string fingerprint() const {
    std::uint64_t h = detail::fnv1a(viewpoint_type);
    h = detail::fnv1a(unfold_mode_name(mode), h);
    for (const auto& f : features) {
      h = detail::fnv1a(f.name, h);
      h = detail::fnv1a(f.kind == FeatureKind::numeric ? "n" : "c", h);
    }
    return detail::hex64(h);
  }
};

// ---------------------------------------------------------------------------
// Event-to-tuple: activity, timestamp, then attributes in lexicographic name
// order with absent assignments rendered as missing.
// ---------------------------------------------------------------------------

struct EventTuple {
  std::string activity;
  Instant timestamp = 0;
  std::vector<std::pair<std::string, AttributeValue>> attributes;
};

inline EventTuple event_tuple(const ObjectCentricLog& log, std::size_t event_index) {
  const EventRecord& e = log.event(event_index);
  EventTuple t;
  t.activity = e.activity;
  t.timestamp = e.timestamp;
  for (const auto& [name, _] : log.attribute_schema) {
    const AttributeValue* v = e.attr(name);
    t.attributes.emplace_back(name, v ? *v : AttributeValue::none());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Prefix statistics.
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> activity_counts(const SingleIdLog& log, const Trace& trace,
                                                std::size_t prefix_len,
                                                const std::vector<std::string>& activities) {
  if (prefix_len == 0 || prefix_len > trace.length()) throw_data("prefix length out of range");
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < prefix_len; ++i) counts[log.trace_event(trace, i).activity]++;
  std::vector<std::size_t> out;
  out.reserve(activities.size());
  for (const auto& a : activities) {
    auto it = counts.find(a);
    out.push_back(it == counts.end() ? 0 : it->second);
  }
  return out;
}

namespace detail {

// Latest value of `attribute` per object of `owner_type` within the prefix:
// scanning in order, an event that assigns the attribute updates every owned
// object it carries.
inline std::map<std::string, AttributeValue> latest_values_per_object(
    const SingleIdLog& log, const Trace& trace, std::size_t prefix_len, const std::string& attribute,
    const std::string& owner_type) {
  std::map<std::string, AttributeValue> latest;
  const ObjectCentricLog& src = *log.source;
  for (std::size_t i = 0; i < prefix_len; ++i) {
    const EventRecord& e = log.trace_event(trace, i);
    const AttributeValue* v = e.attr(attribute);
    if (!v) continue;
    for (const auto& oid : e.omap) {
      const std::string* t = src.registry.type_of(oid);
      if (t && *t == owner_type) latest[oid] = *v;
    }
  }
  return latest;
}

}  // namespace detail

// Aggregated numeric attribute over related objects: one value per object of
// the owner type seen so far (its latest), folded with the given function.
// Missing when no object carries a value yet.
inline AttributeValue aggregate_numeric(const SingleIdLog& log, const Trace& trace, std::size_t prefix_len,
                                        const std::string& attribute, const std::string& owner_type,
                                        AggregateFn fn = AggregateFn::mean) {
  const auto latest = detail::latest_values_per_object(log, trace, prefix_len, attribute, owner_type);
  if (latest.empty()) return AttributeValue::none();
  double acc = fn == AggregateFn::min ? std::numeric_limits<double>::infinity()
               : fn == AggregateFn::max ? -std::numeric_limits<double>::infinity()
                                        : 0.0;
  for (const auto& [_, v] : latest) {
    const double x = v.as_number();
    switch (fn) {
      case AggregateFn::mean:
      case AggregateFn::sum: acc += x; break;
      case AggregateFn::min: acc = std::min(acc, x); break;
      case AggregateFn::max: acc = std::max(acc, x); break;
    }
  }
  if (fn == AggregateFn::mean) acc /= static_cast<double>(latest.size());
  return AttributeValue::number(acc);
}

// Share of owner-type objects whose latest value of the attribute equals
// `value`, over the objects that carry any value. Zero when none do.
inline double aggregate_categorical_ratio(const SingleIdLog& log, const Trace& trace, std::size_t prefix_len,
                                          const std::string& attribute, const std::string& value,
                                          const std::string& owner_type) {
  const auto latest = detail::latest_values_per_object(log, trace, prefix_len, attribute, owner_type);
  if (latest.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& [_, v] : latest) {
    if (v.display() == value) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(latest.size());
}

inline std::size_t count_objects_by_type(const SingleIdLog& log, const Trace& trace, std::size_t prefix_len,
                                         const std::string& object_type) {
  const ObjectCentricLog& src = *log.source;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < prefix_len; ++i) {
    for (const auto& oid : log.trace_event(trace, i).omap) {
      const std::string* t = src.registry.type_of(oid);
      if (t && *t == object_type) seen.insert(oid);
    }
  }
  return seen.size();
}

// Fraction of the objects of `object_type` seen in the prefix whose prefix
// events include `activity` at least once. Zero when no such object exists.
inline double activity_coverage_ratio(const SingleIdLog& log, const Trace& trace, std::size_t prefix_len,
                                      const std::string& object_type, const std::string& activity) {
  const ObjectCentricLog& src = *log.source;
  std::set<std::string> seen;
  std::set<std::string> covered;
  for (std::size_t i = 0; i < prefix_len; ++i) {
    const EventRecord& e = log.trace_event(trace, i);
    for (const auto& oid : e.omap) {
      const std::string* t = src.registry.type_of(oid);
      if (!t || *t != object_type) continue;
      seen.insert(oid);
      if (e.activity == activity) covered.insert(oid);
    }
  }
  if (seen.empty()) return 0.0;
  return static_cast<double>(covered.size()) / static_cast<double>(seen.size());
}

// ---------------------------------------------------------------------------
// Schema construction.
// ---------------------------------------------------------------------------

inline FeatureSchema build_schema(const SingleIdLog& log, const EncodeOptions& options = {}) {
  const ObjectCentricLog& src = *log.source;
  FeatureSchema schema;
  schema.viewpoint_type = log.viewpoint_type;
  schema.mode = log.mode;
  schema.aggregate_fn = options.aggregate_fn;

  std::set<std::size_t> trace_events;
  for (const auto& t : log.traces) trace_events.insert(t.event_indices.begin(), t.event_indices.end());

  std::set<std::string> activities;
  for (const std::size_t idx : trace_events) activities.insert(src.event(idx).activity);

  for (const auto& a : activities) {
    schema.features.push_back(
        {"count:" + a, FeatureKind::numeric, FeatureSource::activity_count, a, "", "", ""});
  }
  schema.features.push_back(
      {"last_activity", FeatureKind::categorical, FeatureSource::last_event_activity, "", "", "", ""});
  schema.features.push_back(
      {"elapsed_seconds", FeatureKind::numeric, FeatureSource::elapsed_time, "", "", "", ""});
  schema.features.push_back(
      {"last_event_epoch", FeatureKind::numeric, FeatureSource::elapsed_time, "", "", "", ""});
  for (const auto& [name, kind] : src.attribute_schema) {
    schema.features.push_back({"last:" + name,
                               kind == AttrKind::numeric ? FeatureKind::numeric : FeatureKind::categorical,
                               FeatureSource::last_event_attribute, "", name, "", ""});
  }

  if (log.mode == UnfoldMode::object_centric_aggregated) {
    const auto owners = infer_attribute_owners(src);

    std::set<std::string> other_types;
    for (const auto& t : src.registry.object_types()) {
      if (t != log.viewpoint_type) other_types.insert(t);
    }
    for (const auto& t : other_types) {
      schema.features.push_back(
          {"objects:" + t, FeatureKind::numeric, FeatureSource::object_count, "", "", "", t});
    }

    const std::string fn_name = aggregate_fn_name(options.aggregate_fn);
    for (const auto& [name, kind] : src.attribute_schema) {
      auto owner_it = owners.find(name);
      if (owner_it == owners.end() || !owner_it->second) continue;
      const std::string& owner = *owner_it->second;
      if (owner == log.viewpoint_type) continue;
      if (kind == AttrKind::numeric) {
        schema.features.push_back({fn_name + ":" + name, FeatureKind::numeric,
                                   FeatureSource::aggregate_numeric, "", name, "", owner});
      } else {
        std::set<std::string> values;
        for (const std::size_t idx : trace_events) {
          if (const AttributeValue* v = src.event(idx).attr(name)) values.insert(v->display());
        }
        for (const auto& v : values) {
          schema.features.push_back({"share:" + name + "=" + v, FeatureKind::numeric,
                                     FeatureSource::aggregate_categorical_ratio, "", name, v, owner});
        }
      }
    }

    // coverage features for (type, activity) pairs that actually co-occur
    std::set<std::pair<std::string, std::string>> pairs;
    for (const std::size_t idx : trace_events) {
      const EventRecord& e = src.event(idx);
      for (const auto& oid : e.omap) {
        const std::string* t = src.registry.type_of(oid);
        if (t && *t != log.viewpoint_type) pairs.emplace(*t, e.activity);
      }
    }
    for (const auto& [type, activity] : pairs) {
      schema.features.push_back({"coverage:" + type + ":" + activity, FeatureKind::numeric,
                                 FeatureSource::activity_coverage, activity, "", "", type});
    }
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Prefix encoding and dataset assembly.
// ---------------------------------------------------------------------------

struct PrefixInstance {
  std::string case_id;
  std::size_t prefix_len = 0;
  std::vector<AttributeValue> x;
  std::optional<double> y;  // regression value or 0/1 class
};

struct Dataset {
  FeatureSchema schema;
  std::vector<PrefixInstance> rows;
  bool classification = false;
};

inline std::vector<AttributeValue> encode_prefix(const SingleIdLog& log, const Trace& trace,
                                                 std::size_t prefix_len, const FeatureSchema& schema) {
  if (schema.viewpoint_type != log.viewpoint_type || schema.mode != log.mode) {
    throw_data("feature schema does not match this unfolded log");
  }
  if (prefix_len == 0 || prefix_len > trace.length()) throw_data("prefix length out of range");
  const ObjectCentricLog& src = *log.source;
  const EventRecord& last = log.trace_event(trace, prefix_len - 1);
  const Instant start = log.trace_event(trace, 0).timestamp;

  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < prefix_len; ++i) counts[log.trace_event(trace, i).activity]++;

  std::vector<AttributeValue> x;
  x.reserve(schema.size());
  for (const auto& f : schema.features) {
    switch (f.source) {
      case FeatureSource::activity_count: {
        auto it = counts.find(f.activity);
        x.push_back(AttributeValue::number(it == counts.end() ? 0.0 : static_cast<double>(it->second)));
        break;
      }
      case FeatureSource::last_event_activity:
        x.push_back(AttributeValue::text(last.activity));
        break;
      case FeatureSource::elapsed_time:
        if (f.name == "last_event_epoch") {
          x.push_back(AttributeValue::number(static_cast<double>(last.timestamp)));
        } else {
          x.push_back(AttributeValue::number(static_cast<double>(last.timestamp - start)));
        }
        break;
      case FeatureSource::last_event_attribute: {
        const AttributeValue* v = last.attr(f.attribute);
        if (!v) {
          x.push_back(f.kind == FeatureKind::categorical ? AttributeValue::text(kMissingCategory)
                                                         : AttributeValue::none());
        } else if (f.kind == FeatureKind::categorical && v->is_number()) {
          x.push_back(AttributeValue::text(v->display()));
        } else {
          x.push_back(*v);
        }
        break;
      }
      case FeatureSource::object_count:
        x.push_back(AttributeValue::number(
            static_cast<double>(count_objects_by_type(log, trace, prefix_len, f.object_type))));
        break;
      case FeatureSource::aggregate_numeric:
        x.push_back(aggregate_numeric(log, trace, prefix_len, f.attribute, f.object_type,
                                      schema.aggregate_fn));
        break;
      case FeatureSource::aggregate_categorical_ratio:
        x.push_back(AttributeValue::number(
            aggregate_categorical_ratio(log, trace, prefix_len, f.attribute, f.value, f.object_type)));
        break;
      case FeatureSource::activity_coverage:
        x.push_back(AttributeValue::number(
            activity_coverage_ratio(log, trace, prefix_len, f.object_type, f.activity)));
        break;
    }
  }
  (void)src;
  return x;
}

// One instance per (trace, prefix length), trace order then length.
inline Dataset build_dataset(const SingleIdLog& log, const FeatureSchema& schema) {
  Dataset dataset;
  dataset.schema = schema;
  for (const auto& trace : log.traces) {
    for (std::size_t len = 1; len <= trace.length(); ++len) {
      PrefixInstance inst;
      inst.case_id = trace.case_id;
      inst.prefix_len = len;
      inst.x = encode_prefix(log, trace, len, schema);
      dataset.rows.push_back(std::move(inst));
    }
  }
  return dataset;
}

inline std::string write_dataset_csv(const Dataset& dataset) {
  std::string out;
  std::vector<std::string> header;
  header.reserve(dataset.schema.size() + 3);
  for (const auto& f : dataset.schema.features) header.push_back(f.name);
  header.push_back("case_id");
  header.push_back("prefix_len");
  header.push_back("label");
  detail::append_csv_row(out, header);
  for (const auto& row : dataset.rows) {
    std::vector<std::string> fields;
    fields.reserve(row.x.size() + 3);
    for (const auto& v : row.x) fields.push_back(v.display());
    fields.push_back(row.case_id);
    fields.push_back(std::to_string(row.prefix_len));
    fields.push_back(row.y ? detail::fmt_double(*row.y) : "");
    detail::append_csv_row(out, fields);
  }
  return out;
}

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : schema.features) {
    nlohmann::json j;
    j["name"] = f.name;
    j["kind"] = f.kind == FeatureKind::numeric ? "numeric" : "categorical";
    j["source"] = feature_source_name(f.source);
    if (!f.activity.empty()) j["activity"] = f.activity;
    if (!f.attribute.empty()) j["attribute"] = f.attribute;
    if (!f.value.empty()) j["value"] = f.value;
    if (!f.object_type.empty()) j["object_type"] = f.object_type;
    features.push_back(std::move(j));
  }
  return nlohmann::json{{"viewpoint", schema.viewpoint_type},
                        {"mode", unfold_mode_name(schema.mode)},
                        {"aggregate_fn", aggregate_fn_name(schema.aggregate_fn)},
                        {"fingerprint", schema.fingerprint()},
                        {"features", std::move(features)}};
}

}  // namespace ocpred
