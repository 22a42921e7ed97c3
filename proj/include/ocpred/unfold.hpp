#pragma once

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ocpred/core.hpp"

namespace ocpred {

// Two objects are related iff some event's omap contains both. Symmetric, no
// self loops.
struct ObjectRelationGraph {
  std::map<std::string, std::set<std::string>> adjacency;

  static ObjectRelationGraph build(const ObjectCentricLog& log) {
    ObjectRelationGraph g;
    for (const auto& e : log.events) {
      for (std::size_t i = 0; i < e.omap.size(); ++i) {
        g.adjacency.try_emplace(e.omap[i]);
        for (std::size_t j = i + 1; j < e.omap.size(); ++j) {
          g.adjacency[e.omap[i]].insert(e.omap[j]);
          g.adjacency[e.omap[j]].insert(e.omap[i]);
        }
      }
    }
    return g;
  }

  const std::set<std::string>* neighbors(const std::string& oid) const {
    auto it = adjacency.find(oid);
    return it == adjacency.end() ? nullptr : &it->second;
  }
};

// Timestamp of the first event that carries the object.
inline Instant first_timestamp(const ObjectCentricLog& log, const std::string& object_id) {
  Instant best = std::numeric_limits<Instant>::max();
  bool seen = false;
  for (const auto& e : log.events) {
    if (e.has_object(object_id) && (!seen || e.timestamp < best)) {
      best = e.timestamp;
      seen = true;
    }
  }
  if (!seen) throw_data("object '" + object_id + "' never appears in the log");
  return best;
}

// Objects sharing an event with o, excluding those of the viewpoint type.
inline std::set<std::string> direct_related(const ObjectCentricLog& log, const std::string& object_id,
                                            const std::string& viewpoint_type) {
  std::set<std::string> out;
  for (const auto& e : log.events) {
    if (!e.has_object(object_id)) continue;
    for (const auto& oid : e.omap) {
      if (oid == object_id) continue;
      const std::string* t = log.registry.type_of(oid);
      if (t && *t != viewpoint_type) out.insert(oid);
    }
  }
  return out;
}

// Transitive related-object set: breadth-first search over the relation graph
// where every hop lands on an object of type different from the viewpoint
// type. The seed object itself is excluded from the result. max_hops, when
// set, truncates the expansion after that many hops.
inline std::set<std::string> related_closure(const ObjectRelationGraph& graph, const ObjectCentricLog& log,
                                             const std::string& object_id,
                                             std::optional<int> max_hops = std::nullopt) {
  const std::string* seed_type = log.registry.type_of(object_id);
  const std::string viewpoint_type = seed_type ? *seed_type : std::string();
  std::set<std::string> closure;
  std::deque<std::pair<std::string, int>> frontier;
  frontier.emplace_back(object_id, 0);
  std::set<std::string> visited{object_id};
  while (!frontier.empty()) {
    auto [current, hops] = frontier.front();
    frontier.pop_front();
    if (max_hops && hops >= *max_hops) continue;
    const std::set<std::string>* nbrs = graph.neighbors(current);
    if (!nbrs) continue;
    for (const auto& next : *nbrs) {
      if (visited.count(next)) continue;
      const std::string* t = log.registry.type_of(next);
      if (!t || *t == viewpoint_type) continue;
      visited.insert(next);
      closure.insert(next);
      frontier.emplace_back(next, hops + 1);
    }
  }
  return closure;
}

inline std::set<std::string> related_closure(const ObjectCentricLog& log, const std::string& object_id,
                                             std::optional<int> max_hops = std::nullopt) {
  return related_closure(ObjectRelationGraph::build(log), log, object_id, max_hops);
}

// Trace of o: every event at or after o's first timestamp that carries o or a
// closure member, in global event order.
inline Trace build_trace(const ObjectCentricLog& log, const std::string& object_id,
                         const std::set<std::string>& closure) {
  const Instant start = first_timestamp(log, object_id);
  Trace trace;
  trace.case_id = object_id;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const EventRecord& e = log.events[i];
    if (e.timestamp < start) continue;
    bool related = e.has_object(object_id);
    if (!related) {
      for (const auto& oid : e.omap) {
        if (closure.count(oid)) {
          related = true;
          break;
        }
      }
    }
    if (related) trace.event_indices.push_back(i);
  }
  return trace;
}

struct UnfoldOptions {
  UnfoldMode mode = UnfoldMode::object_centric;
  std::optional<int> max_hops;  // truncate the closure; unlimited by default
};

// One trace per object of the viewpoint type, ordered by first event then
// case id. Events are never deduplicated across traces.
inline SingleIdLog unfold_log(std::shared_ptr<const ObjectCentricLog> log, const std::string& viewpoint_type,
                              const UnfoldOptions& options = {}) {
  if (!log) throw_internal("unfold_log: null log");
  const auto types = log->registry.object_types();
  if (!types.count(viewpoint_type)) {
    throw_data("unknown viewpoint type '" + viewpoint_type + "'");
  }

  std::vector<std::string> viewpoint_objects;
  for (const auto& [oid, type] : log->registry.otyp) {
    if (type == viewpoint_type) viewpoint_objects.push_back(oid);
  }

  SingleIdLog out;
  out.source = log;
  out.viewpoint_type = viewpoint_type;
  out.mode = options.mode;

  std::optional<ObjectRelationGraph> graph;
  if (options.mode != UnfoldMode::naive) graph = ObjectRelationGraph::build(*log);

  for (const auto& oid : viewpoint_objects) {
    Trace trace;
    trace.case_id = oid;
    if (options.mode == UnfoldMode::naive) {
      for (std::size_t i = 0; i < log->events.size(); ++i) {
        if (log->events[i].has_object(oid)) trace.event_indices.push_back(i);
      }
    } else {
      bool observed = false;
      for (const auto& e : log->events) {
        if (e.has_object(oid)) {
          observed = true;
          break;
        }
      }
      if (!observed) continue;  // registered but never seen: no trace
      const auto closure = related_closure(*graph, *log, oid, options.max_hops);
      trace = build_trace(*log, oid, closure);
    }
    if (!trace.event_indices.empty()) out.traces.push_back(std::move(trace));
  }

  std::sort(out.traces.begin(), out.traces.end(), [](const Trace& a, const Trace& b) {
    if (a.event_indices.front() != b.event_indices.front()) {
      return a.event_indices.front() < b.event_indices.front();
    }
    return a.case_id < b.case_id;
  });
  return out;
}

}  // namespace ocpred
