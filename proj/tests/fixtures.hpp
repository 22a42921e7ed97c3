#pragma once

// Shared fixture: a 21-event procurement log with five interleaving object
// types (contract, requisition, order, receipt, invoice). Bridge events tie
// the life cycles together; blank attributes are genuinely unassigned.
//
// Note: goods receipt e12 re-prices order o2 at 200, so the per-object latest
// order_price values after e12 are o1=100, o2=200, o4=600.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ocpred/core.hpp"
#include "ocpred/ingest.hpp"

namespace fixtures {

using ocpred::AttrKind;
using ocpred::AttributeValue;
using ocpred::make_instant;

inline ocpred::ObjectCentricLog procurement_log() {
  ocpred::LogBuilder b;
  for (const auto& [id, type] : std::vector<std::pair<std::string, std::string>>{
           {"c1", "Contract"},
           {"rq1", "Requisition"},
           {"rq2", "Requisition"},
           {"o1", "Order"},
           {"o2", "Order"},
           {"o3", "Order"},
           {"o4", "Order"},
           {"r1", "Receipt"},
           {"r2", "Receipt"},
           {"r3", "Receipt"},
           {"r4", "Receipt"},
           {"i1", "Invoice"},
           {"i2", "Invoice"},
           {"i3", "Invoice"}}) {
    b.add_object(id, type);
  }

  auto user = [](const char* u) { return AttributeValue::text(u); };
  auto order_attrs = [&](const char* u, double price, const char* month, const char* group) {
    return std::map<std::string, AttributeValue>{{"user", user(u)},
                                                 {"order_price", AttributeValue::number(price)},
                                                 {"order_delivery_month", AttributeValue::text(month)},
                                                 {"order_purch_group", AttributeValue::text(group)}};
  };
  auto receipt_attrs = [&](const char* u, double price, const char* month, const char* group,
                           double qty) {
    auto attrs = order_attrs(u, price, month, group);
    attrs["rec_quantity"] = AttributeValue::number(qty);
    return attrs;
  };

  b.add_event("e1", "Contract Line Creation", make_instant(2017, 7, 11, 9, 0), {"c1"},
              {{"user", user("CO01")}});
  b.add_event("e2", "Purch Contract Item Material Group Changed", make_instant(2017, 7, 14, 11, 0),
              {"c1"}, {{"user", user("CO01")}});
  b.add_event("e3", "Purchase Requisition Line Created", make_instant(2017, 7, 15, 12, 0), {"c1", "rq1"},
              {{"user", user("A456")}});
  b.add_event("e4", "Purchase Requisition Line Created", make_instant(2017, 7, 15, 15, 0), {"c1", "rq2"},
              {{"user", user("A457")}});
  b.add_event("e5", "Purchase Order Line Creation", make_instant(2017, 7, 16, 15, 0), {"c1", "o1"},
              order_attrs("A458", 100, "7", "100_L50"));
  b.add_event("e6", "Purchase Order Line Creation", make_instant(2017, 7, 17, 15, 0), {"rq1", "o2"},
              order_attrs("A458", 200, "8", "100_L51"));
  b.add_event("e7", "Purchase Order Line Creation", make_instant(2017, 7, 18, 15, 0), {"rq2", "o3"},
              order_attrs("A458", 300, "8", "100_L52"));
  b.add_event("e8", "Goods Line Registered", make_instant(2017, 7, 22, 15, 0), {"o1", "r1"},
              receipt_attrs("A456", 100, "7", "100_L50", 10));
  b.add_event("e9", "Invoice Receipt", make_instant(2017, 7, 22, 16, 0), {"i1"}, {{"user", user("A125")}});
  b.add_event("e10", "Purchase Requisition Group Changed", make_instant(2017, 7, 22, 19, 0), {"rq1"},
              {{"user", user("A456")}});
  b.add_event("e11", "Purchase Order Line Creation", make_instant(2017, 7, 23, 9, 0), {"rq1", "o4"},
              order_attrs("A458", 600, "8", "100_L51"));
  b.add_event("e12", "Goods Line Registered", make_instant(2017, 7, 23, 15, 0), {"o2", "r2"},
              receipt_attrs("A456", 200, "8", "100_L50", 10));
  b.add_event("e13", "Invoice Registered", make_instant(2017, 7, 29, 11, 0), {"r1", "r2", "i1"},
              {{"user", user("A125")}, {"rec_quantity", AttributeValue::number(10)}});
  b.add_event("e14", "Invoice Cleared", make_instant(2017, 7, 30, 12, 0), {"i1"},
              {{"user", user("A125")}});
  b.add_event("e15", "Goods Line Registered", make_instant(2017, 7, 31, 15, 0), {"o4", "r3"},
              receipt_attrs("A456", 600, "8", "100_L51", 10));
  b.add_event("e16", "Invoice Registered", make_instant(2017, 8, 10, 11, 0), {"r2", "r3", "i2"},
              {{"user", user("A125")}, {"rec_quantity", AttributeValue::number(10)}});
  b.add_event("e17", "Invoice Cleared", make_instant(2017, 8, 15, 14, 0), {"i2"},
              {{"user", user("A125")}});
  b.add_event("e18", "Goods Line Registered", make_instant(2017, 8, 16, 15, 0), {"o3", "r4"},
              receipt_attrs("A456", 300, "8", "100_L52", 5));
  b.add_event("e19", "Purchase Requisition Supplier Changed", make_instant(2017, 8, 16, 17, 0), {"rq2"},
              {{"user", user("A456")}});
  b.add_event("e20", "Invoice Registered", make_instant(2017, 8, 18, 11, 0), {"r4", "i3"},
              {{"user", user("A125")}, {"rec_quantity", AttributeValue::number(5)}});
  b.add_event("e21", "Invoice Cleared", make_instant(2017, 8, 20, 14, 0), {"i3"},
              {{"user", user("A125")}});

  b.set_attribute_kind("order_delivery_month", AttrKind::categorical);
  b.set_attribute_kind("order_purch_group", AttrKind::categorical);
  b.set_attribute_kind("user", AttrKind::categorical);
  b.set_attribute_kind("order_price", AttrKind::numeric);
  b.set_attribute_kind("rec_quantity", AttrKind::numeric);
  return b.build();
}

inline std::shared_ptr<const ocpred::ObjectCentricLog> procurement_log_ptr() {
  return std::make_shared<const ocpred::ObjectCentricLog>(procurement_log());
}

inline ocpred::FlatCsvSchema procurement_csv_schema() {
  ocpred::FlatCsvSchema schema;
  schema.object_type_columns = {"Contract", "Requisition", "Order", "Receipt", "Invoice"};
  schema.attribute_kinds = {{"user", AttrKind::categorical},
                            {"order_price", AttrKind::numeric},
                            {"order_delivery_month", AttrKind::categorical},
                            {"order_purch_group", AttrKind::categorical},
                            {"rec_quantity", AttrKind::numeric}};
  return schema;
}

inline std::string procurement_csv() {
  const ocpred::FlatCsvSchema schema = procurement_csv_schema();
  return ocpred::write_flat_csv(procurement_log(), &schema);
}

inline std::string procurement_ocel_json() { return ocpred::write_ocel_json(procurement_log()); }

// Event ids of a trace, in order.
inline std::vector<std::string> trace_ids(const ocpred::SingleIdLog& log, const ocpred::Trace& trace) {
  std::vector<std::string> out;
  for (const std::size_t idx : trace.event_indices) out.push_back(log.event(idx).id);
  return out;
}

inline const ocpred::Trace& trace_of(const ocpred::SingleIdLog& log, const std::string& case_id) {
  for (const auto& t : log.traces) {
    if (t.case_id == case_id) return t;
  }
  throw ocpred::Error(ocpred::ErrorKind::internal, "no trace for case " + case_id);
}

// The unfolded requisition view written the way the worked example presents
// it: the first trace in full, the second restricted to the requisition's own
// chain. Used to pin row/instance counts of the writers and encoders against
// a hand-checkable table.
inline ocpred::SingleIdLog narrow_requisition_view(std::shared_ptr<const ocpred::ObjectCentricLog> log,
                                                   ocpred::UnfoldMode mode) {
  ocpred::SingleIdLog view;
  view.source = log;
  view.viewpoint_type = "Requisition";
  view.mode = mode;
  auto index_of = [&](const char* id) -> std::size_t {
    for (std::size_t i = 0; i < log->size(); ++i) {
      if (log->event(i).id == id) return i;
    }
    throw ocpred::Error(ocpred::ErrorKind::internal, "missing event");
  };
  ocpred::Trace rq1{"rq1", {}};
  for (const char* id : {"e3", "e4", "e5", "e6", "e8", "e9", "e10", "e11", "e12", "e13", "e14", "e15",
                         "e16", "e17"}) {
    rq1.event_indices.push_back(index_of(id));
  }
  ocpred::Trace rq2{"rq2", {}};
  for (const char* id : {"e4", "e7", "e18", "e19", "e20", "e21"}) {
    rq2.event_indices.push_back(index_of(id));
  }
  view.traces = {std::move(rq1), std::move(rq2)};
  return view;
}

}  // namespace fixtures
