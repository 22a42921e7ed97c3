#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "ocpred/core.hpp"
#include "ocpred/detail/csv.hpp"

namespace ocpred {

// ---------------------------------------------------------------------------
// Flat CSV: one row per event; one column per object type holding a
// comma-separated id list; every other column is an attribute. Blank cells
// mean "no objects" / "value missing".
// ---------------------------------------------------------------------------

struct FlatCsvSchema {
  std::string id_column = "id";
  std::string activity_column = "activity";
  std::string timestamp_column = "timestamp";
  std::string timestamp_format = "%Y-%m-%d %H:%M";
  std::vector<std::string> object_type_columns;
  std::map<std::string, AttrKind> attribute_kinds;  // optional overrides

  // Sidecar format: "key = value" lines, '#' comments. object_types is a
  // comma-separated list; attribute kinds use "kind:<name> = numeric|categorical".
  static FlatCsvSchema from_sidecar(std::string_view text) {
    FlatCsvSchema s;
    s.object_type_columns.clear();
    for (const auto& raw_line : detail::split(text, '\n')) {
      std::string_view line = detail::trim(raw_line);
      if (line.empty() || line.front() == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string_view::npos) throw_parse("schema sidecar: missing '=' in line '" + std::string(line) + "'");
      std::string key(detail::trim(line.substr(0, eq)));
      std::string value(detail::trim(line.substr(eq + 1)));
      if (key == "id") s.id_column = value;
      else if (key == "activity") s.activity_column = value;
      else if (key == "timestamp") s.timestamp_column = value;
      else if (key == "timestamp_format") s.timestamp_format = value;
      else if (key == "object_types") {
        for (const auto& part : detail::split(value, ',')) {
          std::string t(detail::trim(part));
          if (!t.empty()) s.object_type_columns.push_back(std::move(t));
        }
      } else if (detail::starts_with(key, "kind:")) {
        const std::string name = key.substr(5);
        if (value == "numeric") s.attribute_kinds[name] = AttrKind::numeric;
        else if (value == "categorical") s.attribute_kinds[name] = AttrKind::categorical;
        else throw_parse("schema sidecar: unknown kind '" + value + "' for attribute '" + name + "'");
      } else {
        throw_parse("schema sidecar: unknown key '" + key + "'");
      }
    }
    return s;
  }

  std::string to_sidecar() const {
    std::string out;
    out += "id = " + id_column + "\n";
    out += "activity = " + activity_column + "\n";
    out += "timestamp = " + timestamp_column + "\n";
    out += "timestamp_format = " + timestamp_format + "\n";
    out += "object_types = " + detail::join(object_type_columns, ", ") + "\n";
    for (const auto& [name, kind] : attribute_kinds) {
      out += "kind:" + name + " = " + attr_kind_name(kind) + "\n";
    }
    return out;
  }
};

namespace detail {

// Kind inference: numeric iff every non-blank cell fully parses as a number.
inline std::map<std::string, AttrKind> infer_kinds(
    const std::map<std::string, std::vector<std::string>>& observed,
    const std::map<std::string, AttrKind>& overrides) {
  std::map<std::string, AttrKind> kinds;
  for (const auto& [name, values] : observed) {
    bool all_numeric = true;
    for (const auto& v : values) {
      if (!parse_double(v)) {
        all_numeric = false;
        break;
      }
    }
    kinds[name] = all_numeric && !values.empty() ? AttrKind::numeric : AttrKind::categorical;
  }
  for (const auto& [name, kind] : overrides) kinds[name] = kind;
  return kinds;
}

inline AttributeValue typed_value(const std::string& raw, AttrKind kind) {
  if (kind == AttrKind::numeric) {
    auto num = parse_double(raw);
    if (!num) throw_data("value '" + raw + "' is not numeric");
    return AttributeValue::number(*num);
  }
  return AttributeValue::text(raw);
}

}  // namespace detail

inline ObjectCentricLog parse_flat_csv(std::string_view bytes, const FlatCsvSchema& schema) {
  const detail::CsvTable table = detail::parse_csv(bytes);
  if (table.rows.empty()) throw_parse("flat csv: missing header row");
  const auto& header = table.rows.front();

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const std::string* required : {&schema.id_column, &schema.activity_column, &schema.timestamp_column}) {
    if (!col.count(*required)) throw_parse("flat csv: header lacks required column '" + *required + "'");
  }
  std::set<std::string> object_cols;
  for (const auto& t : schema.object_type_columns) {
    if (!col.count(t)) throw_parse("flat csv: header lacks object type column '" + t + "'");
    object_cols.insert(t);
  }
  std::vector<std::string> attr_cols;
  for (const auto& name : header) {
    if (name == schema.id_column || name == schema.activity_column || name == schema.timestamp_column) continue;
    if (object_cols.count(name)) continue;
    attr_cols.push_back(name);
  }

  struct RawEvent {
    std::string id, activity;
    Instant timestamp;
    std::vector<std::string> omap;
    std::vector<std::pair<std::string, std::string>> attrs;
  };
  std::vector<RawEvent> raw;
  std::map<std::string, std::vector<std::string>> observed;  // attr -> non-blank cells
  LogBuilder builder;
  std::set<std::string> seen_ids;

  for (std::size_t r = 1; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    auto cell = [&](const std::string& name) -> std::string {
      const std::size_t i = col.at(name);
      return i < row.size() ? row[i] : std::string();
    };
    RawEvent e;
    e.id = cell(schema.id_column);
    if (e.id.empty()) throw_parse("flat csv row " + std::to_string(r + 1) + ": empty event id");
    if (!seen_ids.insert(e.id).second) {
      throw_parse("flat csv row " + std::to_string(r + 1) + ": duplicate event id '" + e.id + "'");
    }
    e.activity = cell(schema.activity_column);
    const std::string ts = cell(schema.timestamp_column);
    auto parsed = parse_instant(ts, schema.timestamp_format);
    if (!parsed) parsed = parse_instant_any(ts);
    if (!parsed) throw_parse("flat csv row " + std::to_string(r + 1) + ": unparseable timestamp '" + ts + "'");
    e.timestamp = *parsed;
    for (const auto& type_col : schema.object_type_columns) {
      const std::string ids = cell(type_col);
      for (const auto& part : detail::split(ids, ',')) {
        std::string oid(detail::trim(part));
        if (oid.empty()) continue;
        e.omap.push_back(oid);
        builder.add_object(oid, type_col);
      }
    }
    for (const auto& name : attr_cols) {
      std::string value = cell(name);
      if (value.empty()) continue;  // blank = missing = unassigned
      observed[name].push_back(value);
      e.attrs.emplace_back(name, std::move(value));
    }
    raw.push_back(std::move(e));
  }

  const auto kinds = detail::infer_kinds(observed, schema.attribute_kinds);
  for (auto& e : raw) {
    std::map<std::string, AttributeValue> vmap;
    for (auto& [name, value] : e.attrs) vmap[name] = detail::typed_value(value, kinds.at(name));
    builder.add_event(std::move(e.id), std::move(e.activity), e.timestamp, std::move(e.omap), std::move(vmap));
  }
  for (const auto& [name, kind] : kinds) builder.set_attribute_kind(name, kind);
  return builder.build();
}

// Default layout: id, activity, timestamp, one column per object type
// (alphabetical), then attributes (alphabetical).
inline FlatCsvSchema default_csv_schema(const ObjectCentricLog& log) {
  FlatCsvSchema schema;
  for (const auto& t : log.registry.object_types()) schema.object_type_columns.push_back(t);
  for (const auto& [name, kind] : log.attribute_schema) schema.attribute_kinds[name] = kind;
  return schema;
}

inline std::string write_flat_csv(const ObjectCentricLog& log, const FlatCsvSchema* layout = nullptr) {
  FlatCsvSchema schema = layout ? *layout : default_csv_schema(log);
  std::vector<std::string> attr_names;
  for (const auto& [name, _] : log.attribute_schema) attr_names.push_back(name);

  std::string out;
  std::vector<std::string> header{schema.id_column, schema.activity_column, schema.timestamp_column};
  header.insert(header.end(), schema.object_type_columns.begin(), schema.object_type_columns.end());
  header.insert(header.end(), attr_names.begin(), attr_names.end());
  detail::append_csv_row(out, header);

  for (const auto& e : log.events) {
    std::vector<std::string> row{e.id, e.activity, format_instant(e.timestamp, false)};
    for (const auto& type_col : schema.object_type_columns) {
      std::vector<std::string> ids;
      for (const auto& oid : e.omap) {
        const std::string* t = log.registry.type_of(oid);
        if (t && *t == type_col) ids.push_back(oid);
      }
      row.push_back(detail::join(ids, ","));
    }
    for (const auto& name : attr_names) {
      const AttributeValue* v = e.attr(name);
      row.push_back(v ? v->display() : "");
    }
    detail::append_csv_row(out, row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// OCEL 1.0 JSON.
// ---------------------------------------------------------------------------

inline ObjectCentricLog parse_ocel_json(std::string_view bytes,
                                        const std::map<std::string, AttrKind>* kind_overrides = nullptr) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw_parse("ocel json: " + std::string(e.what()) + " (byte " + std::to_string(e.byte) + ")");
  }
  if (!doc.is_object()) throw_parse("ocel json: top level must be an object");
  const auto events_it = doc.find("ocel:events");
  const auto objects_it = doc.find("ocel:objects");
  if (events_it == doc.end() || objects_it == doc.end()) {
    throw_parse("ocel json: missing 'ocel:events' or 'ocel:objects'");
  }

  LogBuilder builder;
  for (auto it = objects_it->begin(); it != objects_it->end(); ++it) {
    const auto& obj = it.value();
    const auto type_it = obj.find("ocel:type");
    if (type_it == obj.end() || !type_it->is_string()) {
      throw_parse("ocel json: object '" + it.key() + "' lacks a string 'ocel:type'");
    }
    builder.add_object(it.key(), type_it->get<std::string>());
    const auto ovmap_it = obj.find("ocel:ovmap");
    if (ovmap_it != obj.end() && ovmap_it->is_object() && !ovmap_it->empty()) {
      std::map<std::string, AttributeValue> attrs;
      for (auto a = ovmap_it->begin(); a != ovmap_it->end(); ++a) {
        attrs[a.key()] = a.value().is_number()
                             ? AttributeValue::number(a.value().get<double>())
                             : AttributeValue::text(a.value().is_string() ? a.value().get<std::string>()
                                                                          : a.value().dump());
      }
      builder.add_object_attrs(it.key(), std::move(attrs));
    }
  }

  std::set<std::string> known_objects;
  for (auto it = objects_it->begin(); it != objects_it->end(); ++it) known_objects.insert(it.key());

  struct RawEvent {
    std::string id, activity;
    Instant timestamp;
    std::vector<std::string> omap;
    std::vector<std::pair<std::string, std::string>> attrs;
  };
  std::vector<RawEvent> raw;
  std::map<std::string, std::vector<std::string>> observed;
  std::set<std::string> seen_ids;

  for (auto it = events_it->begin(); it != events_it->end(); ++it) {
    const auto& ev = it.value();
    RawEvent e;
    e.id = it.key();
    if (!seen_ids.insert(e.id).second) throw_parse("ocel json: duplicate event id '" + e.id + "'");
    e.activity = ev.value("ocel:activity", std::string());
    const std::string ts = ev.value("ocel:timestamp", std::string());
    auto parsed = parse_instant_any(ts);
    if (!parsed) throw_parse("ocel json: event '" + e.id + "' has unparseable timestamp '" + ts + "'");
    e.timestamp = *parsed;
    const auto omap_it = ev.find("ocel:omap");
    if (omap_it != ev.end()) {
      for (const auto& oid : *omap_it) {
        std::string id = oid.get<std::string>();
        if (!known_objects.count(id)) {
          throw_data("ocel json: event '" + e.id + "' references unknown object '" + id + "'");
        }
        e.omap.push_back(std::move(id));
      }
    }
    const auto vmap_it = ev.find("ocel:vmap");
    if (vmap_it != ev.end() && vmap_it->is_object()) {
      for (auto a = vmap_it->begin(); a != vmap_it->end(); ++a) {
        std::string rendered;
        if (a.value().is_string()) rendered = a.value().get<std::string>();
        else if (a.value().is_number()) rendered = detail::fmt_double(a.value().get<double>());
        else if (a.value().is_boolean()) rendered = a.value().get<bool>() ? "true" : "false";
        else if (a.value().is_null()) continue;
        else rendered = a.value().dump();
        observed[a.key()].push_back(rendered);
        e.attrs.emplace_back(a.key(), std::move(rendered));
      }
    }
    raw.push_back(std::move(e));
  }

  const auto kinds = detail::infer_kinds(observed, kind_overrides ? *kind_overrides
                                                                  : std::map<std::string, AttrKind>{});
  for (auto& e : raw) {
    std::map<std::string, AttributeValue> vmap;
    for (auto& [name, value] : e.attrs) vmap[name] = detail::typed_value(value, kinds.at(name));
    builder.add_event(std::move(e.id), std::move(e.activity), e.timestamp, std::move(e.omap), std::move(vmap));
  }
  for (const auto& [name, kind] : kinds) builder.set_attribute_kind(name, kind);
  return builder.build();
}

inline std::string write_ocel_json(const ObjectCentricLog& log) {
  nlohmann::json doc;
  std::set<std::string> attr_names;
  for (const auto& [name, _] : log.attribute_schema) attr_names.insert(name);
  doc["ocel:global-log"] = {{"ocel:version", "1.0"},
                            {"ocel:attribute-names", attr_names},
                            {"ocel:object-types", log.registry.object_types()}};
  nlohmann::json events = nlohmann::json::object();
  for (const auto& e : log.events) {
    nlohmann::json ev;
    ev["ocel:activity"] = e.activity;
    ev["ocel:timestamp"] = format_instant(e.timestamp, true);
    ev["ocel:omap"] = e.omap;
    nlohmann::json vmap = nlohmann::json::object();
    for (const auto& [name, value] : e.vmap) {
      if (value.is_number()) vmap[name] = value.as_number();
      else vmap[name] = value.display();
    }
    ev["ocel:vmap"] = std::move(vmap);
    events[e.id] = std::move(ev);
  }
  doc["ocel:events"] = std::move(events);
  nlohmann::json objects = nlohmann::json::object();
  for (const auto& [oid, type] : log.registry.otyp) {
    nlohmann::json obj;
    obj["ocel:type"] = type;
    auto ov = log.registry.ovmap.find(oid);
    if (ov != log.registry.ovmap.end()) {
      nlohmann::json ovmap = nlohmann::json::object();
      for (const auto& [name, value] : ov->second) {
        if (value.is_number()) ovmap[name] = value.as_number();
        else ovmap[name] = value.display();
      }
      obj["ocel:ovmap"] = std::move(ovmap);
    }
    objects[oid] = std::move(obj);
  }
  doc["ocel:objects"] = std::move(objects);
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Single-id CSV: one row per (trace, event) occurrence. Events shared across
// traces repeat once per trace; the case id column replaces trace separators.
// ---------------------------------------------------------------------------

inline std::string write_single_id_csv(const SingleIdLog& log) {
  const ObjectCentricLog& src = *log.source;
  std::vector<std::string> type_cols;
  for (const auto& t : src.registry.object_types()) type_cols.push_back(t);
  std::vector<std::string> attr_names;
  for (const auto& [name, _] : src.attribute_schema) attr_names.push_back(name);

  std::string out;
  std::vector<std::string> header{"case_id", "id", "activity", "timestamp"};
  header.insert(header.end(), type_cols.begin(), type_cols.end());
  header.insert(header.end(), attr_names.begin(), attr_names.end());
  detail::append_csv_row(out, header);

  for (const auto& trace : log.traces) {
    for (const std::size_t idx : trace.event_indices) {
      const EventRecord& e = src.event(idx);
      std::vector<std::string> row{trace.case_id, e.id, e.activity, format_instant(e.timestamp, false)};
      for (const auto& type_col : type_cols) {
        std::vector<std::string> ids;
        for (const auto& oid : e.omap) {
          const std::string* t = src.registry.type_of(oid);
          if (t && *t == type_col) ids.push_back(oid);
        }
        row.push_back(detail::join(ids, ","));
      }
      for (const auto& name : attr_names) {
        const AttributeValue* v = e.attr(name);
        row.push_back(v ? v->display() : "");
      }
      detail::append_csv_row(out, row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Attribute preprocessing.
// ---------------------------------------------------------------------------

struct DropResult {
  ObjectCentricLog log;
  std::vector<std::string> dropped;
};

namespace detail {

inline ObjectCentricLog without_attributes(const ObjectCentricLog& log, const std::set<std::string>& names) {
  ObjectCentricLog out = log;
  for (auto& e : out.events) {
    for (const auto& name : names) e.vmap.erase(name);
  }
  for (const auto& name : names) out.attribute_schema.erase(name);
  out.rebuild_index();
  return out;
}

}  // namespace detail

// Missingness is counted over the events where the attribute's owning object
// type is present; attributes without an owner are counted over all events.
inline DropResult drop_sparse_attributes(const ObjectCentricLog& log, double threshold) {
  if (threshold < 0.0 || threshold > 1.0) throw_data("sparse threshold must lie in [0, 1]");
  const auto owners = infer_attribute_owners(log);
  std::set<std::string> to_drop;
  for (const auto& [name, owner] : owners) {
    std::size_t in_scope = 0;
    std::size_t missing = 0;
    for (const auto& e : log.events) {
      bool scoped = true;
      if (owner) {
        scoped = false;
        for (const auto& oid : e.omap) {
          const std::string* t = log.registry.type_of(oid);
          if (t && *t == *owner) {
            scoped = true;
            break;
          }
        }
      }
      if (!scoped) continue;
      ++in_scope;
      if (!e.attr(name)) ++missing;
    }
    if (in_scope == 0) {
      to_drop.insert(name);  // never observable at all
      continue;
    }
    const double fraction = static_cast<double>(missing) / static_cast<double>(in_scope);
    if (fraction > threshold) to_drop.insert(name);
  }
  DropResult result{detail::without_attributes(log, to_drop), {to_drop.begin(), to_drop.end()}};
  return result;
}

// Dropped iff exactly one distinct non-missing value is ever observed.
inline DropResult drop_constant_attributes(const ObjectCentricLog& log) {
  std::set<std::string> to_drop;
  for (const auto& [name, _] : log.attribute_schema) {
    std::set<std::string> values;
    for (const auto& e : log.events) {
      if (const AttributeValue* v = e.attr(name)) values.insert(v->display());
      if (values.size() > 1) break;
    }
    if (values.size() == 1) to_drop.insert(name);
  }
  return {detail::without_attributes(log, to_drop), {to_drop.begin(), to_drop.end()}};
}

inline ObjectCentricLog drop_attributes(const ObjectCentricLog& log, const std::vector<std::string>& names) {
  return detail::without_attributes(log, {names.begin(), names.end()});
}

// 80-20 reduction: keep the most frequent values until they cover `coverage`
// of the assignments, rewrite the rest to "other". Ordering is frequency
// descending then value ascending; a value tied at the cutoff is kept.
inline ObjectCentricLog pareto_reduce(const ObjectCentricLog& log, const std::string& attribute,
                                      double coverage) {
  auto schema_it = log.attribute_schema.find(attribute);
  if (schema_it == log.attribute_schema.end()) throw_data("pareto: unknown attribute '" + attribute + "'");
  if (schema_it->second != AttrKind::categorical) {
    throw_data("pareto: attribute '" + attribute + "' is numeric");
  }
  if (!(coverage > 0.0) || coverage > 1.0) throw_data("pareto: coverage must lie in (0, 1]");

  std::map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const auto& e : log.events) {
    if (const AttributeValue* v = e.attr(attribute)) {
      ++freq[v->as_text()];
      ++total;
    }
  }
  if (total == 0) return log;

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::set<std::string> kept;
  std::size_t cumulative = 0;
  for (const auto& [value, count] : ranked) {
    kept.insert(value);
    cumulative += count;
    if (static_cast<double>(cumulative) >= coverage * static_cast<double>(total)) break;
  }
  if (kept.size() == ranked.size()) return log;

  ObjectCentricLog out = log;
  for (auto& e : out.events) {
    auto it = e.vmap.find(attribute);
    if (it != e.vmap.end() && !kept.count(it->second.as_text())) {
      it->second = AttributeValue::text("other");
    }
  }
  out.rebuild_index();
  return out;
}

}  // namespace ocpred
