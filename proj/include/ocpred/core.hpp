#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ocpred/detail/strings.hpp"

namespace ocpred {

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorKind { parse, data, validation, internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message) : std::runtime_error(std::move(message)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_parse(std::string msg) { throw Error(ErrorKind::parse, std::move(msg)); }
[[noreturn]] inline void throw_data(std::string msg) { throw Error(ErrorKind::data, std::move(msg)); }
[[noreturn]] inline void throw_validation(std::string msg) { throw Error(ErrorKind::validation, std::move(msg)); }
[[noreturn]] inline void throw_internal(std::string msg) { throw Error(ErrorKind::internal, std::move(msg)); }

// ---------------------------------------------------------------------------
// Time: UTC instants at second precision.
// ---------------------------------------------------------------------------

using Instant = std::int64_t;  // seconds since Unix epoch

inline constexpr double kSecondsPerDay = 86400.0;

namespace detail {

// Howard Hinnant's civil date algorithms.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y += m <= 2;
}

}  // namespace detail

struct CivilTime {
  std::int64_t year = 1970;
  unsigned month = 1, day = 1, hour = 0, minute = 0, second = 0;
};

inline Instant make_instant(std::int64_t year, unsigned month, unsigned day, unsigned hour = 0,
                            unsigned minute = 0, unsigned second = 0) {
  return detail::days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

inline CivilTime civil_of(Instant t) {
  std::int64_t days = t / 86400;
  std::int64_t rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  CivilTime c;
  detail::civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<unsigned>(rem / 3600);
  c.minute = static_cast<unsigned>((rem / 60) % 60);
  c.second = static_cast<unsigned>(rem % 60);
  return c;
}

inline std::string format_instant(Instant t, bool with_seconds = true) {
  const CivilTime c = civil_of(t);
  char buf[32];
  if (with_seconds) {
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02u:%02u:%02u", static_cast<long long>(c.year),
                  c.month, c.day, c.hour, c.minute, c.second);
  } else {
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02u:%02u", static_cast<long long>(c.year), c.month,
                  c.day, c.hour, c.minute);
  }
  return buf;
}

// strftime-like matcher supporting %Y %m %d %H %M %S. Numeric fields accept
// one or two digits (%Y takes four) so "2017-07-11 9:00" parses with the
// default "%Y-%m-%d %H:%M" format.
inline std::optional<Instant> parse_instant(std::string_view text, std::string_view format) {
  std::size_t ti = 0;
  std::int64_t year = 1970;
  unsigned month = 1, day = 1, hour = 0, minute = 0, second = 0;
  auto read_num = [&](unsigned max_digits, std::int64_t& out) -> bool {
    std::size_t n = 0;
    std::int64_t v = 0;
    while (ti < text.size() && n < max_digits && text[ti] >= '0' && text[ti] <= '9') {
      v = v * 10 + (text[ti] - '0');
      ++ti;
      ++n;
    }
    if (n == 0) return false;
    out = v;
    return true;
  };
  for (std::size_t fi = 0; fi < format.size(); ++fi) {
    if (format[fi] == '%' && fi + 1 < format.size()) {
      std::int64_t v = 0;
      const char spec = format[++fi];
      const unsigned digits = spec == 'Y' ? 4 : 2;
      if (!read_num(digits, v)) return std::nullopt;
      switch (spec) {
        case 'Y': year = v; break;
        case 'm': month = static_cast<unsigned>(v); break;
        case 'd': day = static_cast<unsigned>(v); break;
        case 'H': hour = static_cast<unsigned>(v); break;
        case 'M': minute = static_cast<unsigned>(v); break;
        case 'S': second = static_cast<unsigned>(v); break;
        default: return std::nullopt;
      }
    } else {
      if (ti >= text.size() || text[ti] != format[fi]) return std::nullopt;
      ++ti;
    }
  }
  if (ti != text.size()) return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
    return std::nullopt;
  }
  return make_instant(year, month, day, hour, minute, second);
}

// Accepts ISO 8601 ("2017-07-11T09:00:00", optional fraction and zone) and the
// plain "YYYY-MM-DD HH:MM[:SS]" layout. Zone offsets are normalized to UTC.
inline std::optional<Instant> parse_instant_any(std::string_view text) {
  text = detail::trim(text);
  std::string_view body = text;
  std::int64_t offset_seconds = 0;
  bool has_zone = false;
  if (!body.empty() && (body.back() == 'Z' || body.back() == 'z')) {
    body.remove_suffix(1);
    has_zone = true;
  } else if (body.size() >= 6) {
    const char sign = body[body.size() - 6];
    const char sign3 = body[body.size() - 3];
    if ((sign == '+' || sign == '-') && sign3 == ':') {
      auto hh = detail::parse_int(body.substr(body.size() - 5, 2));
      auto mm = detail::parse_int(body.substr(body.size() - 2, 2));
      if (hh && mm) {
        offset_seconds = (*hh * 3600 + *mm * 60) * (sign == '-' ? -1 : 1);
        body.remove_suffix(6);
        has_zone = true;
      }
    }
  }
  std::string normalized(body);
  auto tpos = normalized.find('T');
  if (tpos != std::string::npos) normalized[tpos] = ' ';
  auto dot = normalized.find('.');
  if (dot != std::string::npos) normalized.resize(dot);  // drop fractional seconds
  std::optional<Instant> t = parse_instant(normalized, "%Y-%m-%d %H:%M:%S");
  if (!t) t = parse_instant(normalized, "%Y-%m-%d %H:%M");
  if (!t) return std::nullopt;
  (void)has_zone;
  return *t - offset_seconds;
}

// ---------------------------------------------------------------------------
// Attribute values.
// ---------------------------------------------------------------------------

enum class AttrKind { numeric, categorical };

inline const char* attr_kind_name(AttrKind k) { return k == AttrKind::numeric ? "numeric" : "categorical"; }

// One of: number, text, missing. Missing is distinct from 0 and "".
class AttributeValue {
 public:
  AttributeValue() = default;

  static AttributeValue number(double v) {
    AttributeValue a;
    a.state_ = State::number;
    a.num_ = v;
    return a;
  }
  static AttributeValue text(std::string v) {
    AttributeValue a;
    a.state_ = State::text;
    a.text_ = std::move(v);
    return a;
  }
  static AttributeValue none() { return AttributeValue(); }

  bool is_missing() const { return state_ == State::missing; }
  bool is_number() const { return state_ == State::number; }
  bool is_text() const { return state_ == State::text; }

  double as_number() const {
    if (state_ != State::number) throw_internal("attribute value is not numeric");
    return num_;
  }
  const std::string& as_text() const {
    if (state_ != State::text) throw_internal("attribute value is not text");
    return text_;
  }

  std::string display() const {
    switch (state_) {
      case State::missing: return "";
      case State::number: return detail::fmt_double(num_);
      case State::text: return text_;
    }
    return "";
  }

  friend bool operator==(const AttributeValue& a, const AttributeValue& b) {
    if (a.state_ != b.state_) return false;
    switch (a.state_) {
      case State::missing: return true;
      case State::number: return a.num_ == b.num_;
      case State::text: return a.text_ == b.text_;
    }
    return false;
  }

 private:
  enum class State { missing, number, text };
  State state_ = State::missing;
  double num_ = 0;
  std::string text_;
};

// Sentinel category used when a categorical feature has no value.
inline constexpr const char* kMissingCategory = "\xe2\x9f\x82missing";  // "⟂missing"

// ---------------------------------------------------------------------------
// Log model.
// ---------------------------------------------------------------------------

struct EventRecord {
  std::string id;
  std::string activity;
  Instant timestamp = 0;
  std::map<std::string, AttributeValue> vmap;  // assigned attributes only
  std::vector<std::string> omap;               // sorted, unique object ids

  const AttributeValue* attr(std::string_view name) const {
    auto it = vmap.find(std::string(name));
    return it == vmap.end() ? nullptr : &it->second;
  }
  bool has_object(std::string_view oid) const {
    return std::binary_search(omap.begin(), omap.end(), oid);
  }
};

struct ObjectRegistry {
  std::map<std::string, std::string> otyp;  // object id -> object type
  // Object-level attributes: accepted on ingestion, not consumed by encoding.
  std::map<std::string, std::map<std::string, AttributeValue>> ovmap;

  const std::string* type_of(std::string_view oid) const {
    auto it = otyp.find(std::string(oid));
    return it == otyp.end() ? nullptr : &it->second;
  }
  std::set<std::string> object_types() const {
    std::set<std::string> types;
    for (const auto& [_, t] : otyp) types.insert(t);
    return types;
  }
};

class ObjectCentricLog {
 public:
  std::vector<EventRecord> events;  // kept sorted by (timestamp, id)
  ObjectRegistry registry;
  std::map<std::string, AttrKind> attribute_schema;

  const EventRecord& event(std::size_t index) const { return events[index]; }
  std::size_t size() const { return events.size(); }

  const EventRecord* find_event(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &events[it->second];
  }

  std::set<std::string> activities() const {
    std::set<std::string> acts;
    for (const auto& e : events) acts.insert(e.activity);
    return acts;
  }

  void rebuild_index() {
    std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
      if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
      return a.id < b.id;
    });
    index_.clear();
    index_.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) index_.emplace(events[i].id, i);
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Total event order: by timestamp, ties broken by lexicographic event id.
inline std::vector<std::string> order_events(const ObjectCentricLog& log) {
  std::vector<const EventRecord*> ptrs;
  ptrs.reserve(log.events.size());
  for (const auto& e : log.events) ptrs.push_back(&e);
  std::sort(ptrs.begin(), ptrs.end(), [](const EventRecord* a, const EventRecord* b) {
    if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
    return a->id < b->id;
  });
  std::vector<std::string> out;
  out.reserve(ptrs.size());
  for (const auto* p : ptrs) out.push_back(p->id);
  return out;
}

class LogBuilder {
 public:
  LogBuilder& add_object(std::string id, std::string type) {
    log_.registry.otyp[std::move(id)] = std::move(type);
    return *this;
  }

  LogBuilder& add_object_attrs(const std::string& id, std::map<std::string, AttributeValue> attrs) {
    log_.registry.ovmap[id] = std::move(attrs);
    return *this;
  }

  LogBuilder& add_event(std::string id, std::string activity, Instant timestamp,
                        std::vector<std::string> omap,
                        std::map<std::string, AttributeValue> vmap = {}) {
    EventRecord e;
    e.id = std::move(id);
    e.activity = std::move(activity);
    e.timestamp = timestamp;
    e.omap = std::move(omap);
    std::sort(e.omap.begin(), e.omap.end());
    e.omap.erase(std::unique(e.omap.begin(), e.omap.end()), e.omap.end());
    // drop explicit missing entries: an unassigned attribute is simply absent
    for (auto it = vmap.begin(); it != vmap.end();) {
      if (it->second.is_missing()) it = vmap.erase(it);
      else ++it;
    }
    e.vmap = std::move(vmap);
    log_.events.push_back(std::move(e));
    return *this;
  }

  LogBuilder& set_attribute_kind(std::string name, AttrKind kind) {
    overrides_[std::move(name)] = kind;
    return *this;
  }

  // Numeric iff every observed value is a number; overrides win.
  ObjectCentricLog build() {
    std::map<std::string, AttrKind> schema;
    for (const auto& e : log_.events) {
      for (const auto& [name, value] : e.vmap) {
        auto it = schema.find(name);
        const AttrKind observed = value.is_number() ? AttrKind::numeric : AttrKind::categorical;
        if (it == schema.end()) schema.emplace(name, observed);
        else if (observed == AttrKind::categorical) it->second = AttrKind::categorical;
      }
    }
    for (const auto& [name, kind] : overrides_) schema[name] = kind;
    log_.attribute_schema = std::move(schema);
    log_.rebuild_index();
    return std::move(log_);
  }

 private:
  ObjectCentricLog log_;
  std::map<std::string, AttrKind> overrides_;
};

// ---------------------------------------------------------------------------
// Validation. Violations are data, not failures.
// ---------------------------------------------------------------------------

struct ValidationIssue {
  std::string rule;     // "duplicate event id" | "empty omap" | "unknown object" | "mixed attribute kind"
  std::string subject;  // event id, object id or attribute name
  std::string detail;
};

inline std::vector<ValidationIssue> validate_log(const ObjectCentricLog& log) {
  std::vector<ValidationIssue> issues;
  std::set<std::string> seen_ids;
  for (const auto& e : log.events) {
    if (!seen_ids.insert(e.id).second) {
      issues.push_back({"duplicate event id", e.id, "event id occurs more than once"});
    }
    if (e.omap.empty()) {
      issues.push_back({"empty omap", e.id, "event references no objects"});
    }
    for (const auto& oid : e.omap) {
      if (!log.registry.type_of(oid)) {
        issues.push_back({"unknown object", e.id, "object '" + oid + "' is not in the registry"});
      }
    }
  }
  // one declared kind per attribute across the whole log
  for (const auto& [name, kind] : log.attribute_schema) {
    for (const auto& e : log.events) {
      const AttributeValue* v = e.attr(name);
      if (!v) continue;
      const AttrKind observed = v->is_number() ? AttrKind::numeric : AttrKind::categorical;
      if (observed != kind) {
        issues.push_back({"mixed attribute kind", name,
                          "event '" + e.id + "' assigns a " + attr_kind_name(observed) + " value but '" +
                              name + "' is " + attr_kind_name(kind)});
        break;
      }
    }
  }
  return issues;
}

// Owner type of an attribute: the unique object type present on every event
// that assigns it. Attributes set across unrelated events (e.g. the acting
// user) have no owner and stay out of per-object aggregation.
inline std::map<std::string, std::optional<std::string>> infer_attribute_owners(
    const ObjectCentricLog& log) {
  std::map<std::string, std::optional<std::set<std::string>>> candidates;
  for (const auto& e : log.events) {
    std::set<std::string> event_types;
    for (const auto& oid : e.omap) {
      if (const std::string* t = log.registry.type_of(oid)) event_types.insert(*t);
    }
    for (const auto& [name, _] : e.vmap) {
      auto it = candidates.find(name);
      if (it == candidates.end()) {
        candidates.emplace(name, event_types);
      } else if (it->second) {
        std::set<std::string> merged;
        std::set_intersection(it->second->begin(), it->second->end(), event_types.begin(),
                              event_types.end(), std::inserter(merged, merged.begin()));
        it->second = std::move(merged);
      }
    }
  }
  std::map<std::string, std::optional<std::string>> owners;
  for (const auto& [name, _] : log.attribute_schema) {
    auto it = candidates.find(name);
    if (it == candidates.end() || !it->second || it->second->empty()) {
      owners[name] = std::nullopt;
    } else {
      owners[name] = *it->second->begin();  // deterministic pick on ties
    }
  }
  return owners;
}

// ---------------------------------------------------------------------------
// Single-id view.
// ---------------------------------------------------------------------------

enum class UnfoldMode { naive, object_centric, object_centric_aggregated };

inline const char* unfold_mode_name(UnfoldMode m) {
  switch (m) {
    case UnfoldMode::naive: return "naive";
    case UnfoldMode::object_centric: return "object";
    case UnfoldMode::object_centric_aggregated: return "object-aggr";
  }
  return "?";
}

inline std::optional<UnfoldMode> unfold_mode_from_name(std::string_view name) {
  if (name == "naive") return UnfoldMode::naive;
  if (name == "object") return UnfoldMode::object_centric;
  if (name == "object-aggr") return UnfoldMode::object_centric_aggregated;
  return std::nullopt;
}

struct Trace {
  std::string case_id;                     // the viewpoint object
  std::vector<std::size_t> event_indices;  // strictly increasing positions in the shared store

  std::size_t length() const { return event_indices.size(); }
};

struct SingleIdLog {
  std::shared_ptr<const ObjectCentricLog> source;  // shared event store
  std::string viewpoint_type;
  UnfoldMode mode = UnfoldMode::object_centric;
  std::vector<Trace> traces;

  const EventRecord& event(std::size_t index) const { return source->event(index); }
  const EventRecord& trace_event(const Trace& t, std::size_t pos) const {
    return source->event(t.event_indices[pos]);
  }
};

}  // namespace ocpred
