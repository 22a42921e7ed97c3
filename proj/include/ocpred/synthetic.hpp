#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ocpred/core.hpp"
#include "ocpred/detail/rng.hpp"

namespace ocpred {

// Desk-scale procurement generator: contracts spawn requisitions, requisitions
// spawn orders, orders are received and invoiced. The requisition closing gap
// carries a planted additive term driven by the order count and the mean order
// weight, so object-interaction features hold real signal; zero coefficients
// give a structure-independent negative control.
struct SyntheticSpec {
  int n_requisitions = 100;
  int requisitions_per_contract = 1;
  int min_orders = 1;
  int max_orders = 5;
  int max_receipts_per_order = 2;    // partial deliveries
  int max_receipts_per_invoice = 2;
  int min_workflow_steps = 18;       // requisition-internal bookkeeping events
  int max_workflow_steps = 30;
  double paired_order_prob = 0.35;   // chance an order creation event carries two orders
  double expedited_order_prob = 0.5; // orders arrive under two distinct creation activities
  double contract_order_prob = 0.0;  // chance of an extra order attached to the contract only
  double base_cycle_days = 5.0;
  double order_count_coeff_hours = 36.0;
  double weight_coeff_hours = 6.0;
  double noise_hours = 6.0;
  double start_window_days = 3.0;
  std::uint64_t seed = 7;
};

inline ObjectCentricLog generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_requisitions < 1) throw_data("synthetic: n_requisitions must be >= 1");
  if (spec.requisitions_per_contract < 1) throw_data("synthetic: requisitions_per_contract must be >= 1");
  if (spec.min_orders < 1 || spec.max_orders < spec.min_orders) {
    throw_data("synthetic: order fan-out range is invalid");
  }
  if (spec.max_receipts_per_invoice < 1) throw_data("synthetic: max_receipts_per_invoice must be >= 1");

  detail::Rng rng(spec.seed);
  LogBuilder builder;
  int event_seq = 0;
  int order_seq = 0;
  int receipt_seq = 0;
  int invoice_seq = 0;

  auto next_event_id = [&] { return "e" + std::to_string(++event_seq); };
  auto pick_user = [&] { return "A" + std::to_string(45 + rng.uniform_int(0, 7)); };
  auto pick_priority = [&]() -> std::string {
    static const char* kLevels[] = {"low", "normal", "high", "rush"};
    return kLevels[rng.uniform_int(0, 3)];
  };

  const Instant epoch = make_instant(2021, 3, 1, 8, 0, 0);
  const double day = kSecondsPerDay;
  const double base_cycle = spec.base_cycle_days * day;

  struct OrderChain {
    std::string order_id;
    double weight = 0.0;
  };

  // one to max_receipts_per_order partial deliveries per order; invoices
  // group consecutive receipts
  auto emit_fulfilment = [&](const std::vector<OrderChain>& orders, Instant window_start,
                             double window_len) {
    struct ReceiptEvent {
      Instant at;
      std::string receipt_id;
      double quantity;
    };
    std::vector<ReceiptEvent> receipts;
    Instant latest = window_start;
    for (const auto& order : orders) {
      const auto deliveries = static_cast<int>(rng.uniform_int(1, spec.max_receipts_per_order));
      for (int dl = 0; dl < deliveries; ++dl) {
        const std::string receipt_id = "r" + std::to_string(++receipt_seq);
        const auto at = static_cast<Instant>(window_start + rng.uniform(0.0, window_len));
        const double quantity = static_cast<double>(rng.uniform_int(1, 20));
        builder.add_object(receipt_id, "Receipt");
        builder.add_event(next_event_id(), "Goods Line Registered", at, {order.order_id, receipt_id},
                          {{"order_weight", AttributeValue::number(order.weight)},
                           {"rec_quantity", AttributeValue::number(quantity)},
                           {"user", AttributeValue::text(pick_user())}});
        receipts.push_back({at, receipt_id, quantity});
        latest = std::max(latest, at);
      }
    }
    std::sort(receipts.begin(), receipts.end(), [](const ReceiptEvent& a, const ReceiptEvent& b) {
      if (a.at != b.at) return a.at < b.at;
      return a.receipt_id < b.receipt_id;
    });
    std::size_t i = 0;
    while (i < receipts.size()) {
      const auto group_size = static_cast<std::size_t>(
          rng.uniform_int(1, spec.max_receipts_per_invoice));
      const std::size_t end = std::min(i + group_size, receipts.size());
      const std::string invoice_id = "i" + std::to_string(++invoice_seq);
      builder.add_object(invoice_id, "Invoice");
      Instant group_latest = 0;
      double total_quantity = 0.0;
      std::vector<std::string> omap;
      for (std::size_t j = i; j < end; ++j) {
        group_latest = std::max(group_latest, receipts[j].at);
        total_quantity += receipts[j].quantity;
        omap.push_back(receipts[j].receipt_id);
      }
      omap.push_back(invoice_id);
      const auto registered_at = static_cast<Instant>(group_latest + rng.uniform(2.0, 8.0) * 3600.0);
      builder.add_event(next_event_id(), "Invoice Registered", registered_at, omap,
                        {{"rec_quantity", AttributeValue::number(total_quantity)},
                         {"user", AttributeValue::text(pick_user())}});
      const auto cleared_at = static_cast<Instant>(registered_at + rng.uniform(4.0, 12.0) * 3600.0);
      builder.add_event(next_event_id(), "Invoice Cleared", cleared_at, {invoice_id},
                        {{"user", AttributeValue::text(pick_user())}});
      latest = std::max(latest, cleared_at);
      i = end;
    }
    return latest;
  };

  const int n_contracts =
      (spec.n_requisitions + spec.requisitions_per_contract - 1) / spec.requisitions_per_contract;
  int requisitions_left = spec.n_requisitions;

  for (int c = 0; c < n_contracts; ++c) {
    const std::string contract_id = "ct" + std::to_string(c + 1);
    builder.add_object(contract_id, "Contract");
    const auto contract_start =
        static_cast<Instant>(epoch + rng.uniform(0.0, spec.start_window_days * day));
    builder.add_event(next_event_id(), "Contract Line Creation", contract_start, {contract_id},
                      {{"user", AttributeValue::text(pick_user())}});

    if (rng.uniform01() < spec.contract_order_prob) {
      const std::string order_id = "o" + std::to_string(++order_seq);
      builder.add_object(order_id, "Order");
      const double weight = static_cast<double>(rng.uniform_int(1, 10));
      builder.add_event(next_event_id(), "Purchase Order Line Creation",
                        static_cast<Instant>(contract_start + rng.uniform(1.0, 4.0) * 3600.0),
                        {contract_id, order_id},
                        {{"order_weight", AttributeValue::number(weight)},
                         {"order_priority", AttributeValue::text(pick_priority())},
                         {"user", AttributeValue::text(pick_user())}});
      emit_fulfilment({{order_id, weight}}, static_cast<Instant>(contract_start + 6 * 3600),
                      0.7 * base_cycle);
    }

    const int reqs_here = std::min(spec.requisitions_per_contract, requisitions_left);
    requisitions_left -= reqs_here;
    for (int q = 0; q < reqs_here; ++q) {
      const std::string req_id = "rq" + std::to_string(spec.n_requisitions - requisitions_left - reqs_here + q + 1);
      builder.add_object(req_id, "Requisition");
      const auto req_start = static_cast<Instant>(contract_start + (4 + 2 * q) * 3600);
      builder.add_event(next_event_id(), "Purchase Requisition Line Created", req_start,
                        {contract_id, req_id}, {{"user", AttributeValue::text(pick_user())}});

      const int n_orders = static_cast<int>(rng.uniform_int(spec.min_orders, spec.max_orders));
      std::vector<OrderChain> orders;
      double weight_total = 0.0;
      int created = 0;
      int batch_index = 0;
      while (created < n_orders) {
        int batch = 1;
        if (n_orders - created >= 2 && rng.uniform01() < spec.paired_order_prob) batch = 2;
        const double weight = static_cast<double>(rng.uniform_int(1, 10));
        std::vector<std::string> omap{req_id};
        for (int b = 0; b < batch; ++b) {
          const std::string order_id = "o" + std::to_string(++order_seq);
          builder.add_object(order_id, "Order");
          omap.push_back(order_id);
          orders.push_back({order_id, weight});
          weight_total += weight;
          ++created;
        }
        const bool expedited = rng.uniform01() < spec.expedited_order_prob;
        builder.add_event(next_event_id(),
                          expedited ? "Purchase Order Expedited Creation"
                                    : "Purchase Order Line Creation",
                          req_start + (batch_index + 1) * 1800, omap,
                          {{"order_weight", AttributeValue::number(weight)},
                           {"order_priority", AttributeValue::text(pick_priority())},
                           {"user", AttributeValue::text(pick_user())}});
        ++batch_index;
      }

      // requisition-internal bookkeeping spread over the base cycle
      static const char* kSteps[] = {"Purchase Requisition Group Changed",
                                     "Purchase Requisition Supplier Changed",
                                     "Purchase Requisition Approved"};
      const auto n_steps =
          static_cast<int>(rng.uniform_int(spec.min_workflow_steps, spec.max_workflow_steps));
      for (int s = 0; s < n_steps; ++s) {
        const auto at =
            static_cast<Instant>(static_cast<double>(req_start) + 3600.0 +
                                 rng.uniform(0.0, 0.85 * base_cycle));
        builder.add_event(next_event_id(), kSteps[s % 3], at, {req_id},
                          {{"user", AttributeValue::text(pick_user())}});
      }

      const Instant fulfilment_latest =
          emit_fulfilment(orders, req_start + 2 * 3600, 0.7 * base_cycle);

      const double mean_weight = weight_total / static_cast<double>(n_orders);
      const double planted = spec.order_count_coeff_hours * 3600.0 * static_cast<double>(n_orders) +
                             spec.weight_coeff_hours * 3600.0 * mean_weight;
      const double noise = rng.normal(0.0, spec.noise_hours * 3600.0);
      auto close_at = static_cast<Instant>(static_cast<double>(req_start) + base_cycle + planted + noise);
      close_at = std::max(close_at, fulfilment_latest + 3600);
      builder.add_event(next_event_id(), "Purchase Requisition Closed", close_at, {req_id},
                        {{"user", AttributeValue::text(pick_user())}});
    }
  }
  return builder.build();
}

}  // namespace ocpred
