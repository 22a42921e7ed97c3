// ocpred: unfold object-centric event logs around a viewpoint, build prefix
// datasets, train gradient-boosted KPI models and explain the predictions.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ocpred/pipeline.hpp"
#include "ocpred/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ocpred;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return 2;
    case ErrorKind::parse:
    case ErrorKind::data: return 3;
    case ErrorKind::internal: return 4;
  }
  return 4;
}

struct CommonOpts {
  std::string config_path;
  std::string input;
  std::string format;
  std::string csv_schema;
  std::string viewpoint;
  std::string mode;
  std::optional<int> max_hops;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out_dir;
  std::vector<std::string> drop_attrs;
  std::string kpi_kind;
  std::string kpi_activity;
  std::string kpi_attribute;
  std::string kpi_value;
  std::string kpi_source;
  std::string kpi_target;
  std::string kpi_due;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "pipeline config file (JSON); flags override its keys");
  cmd->add_option("--input", o.input, "input log file");
  cmd->add_option("--format", o.format, "input format: csv | ocel-json");
  cmd->add_option("--csv-schema", o.csv_schema, "schema sidecar for csv input");
  cmd->add_option("--viewpoint", o.viewpoint, "object type to unfold around");
  cmd->add_option("--mode", o.mode, "unfolding mode: naive | object | object-aggr");
  cmd->add_option("--max-hops", o.max_hops, "truncate the related-object closure at this many hops");
  cmd->add_option("--seed", o.seed, "split seed");
  cmd->add_option("--workers", o.workers, "worker threads for training and encoding");
  cmd->add_option("--out", o.out_dir, "output directory (default $OCPRED_OUT or ./ocpred-out)");
  cmd->add_option("--drop-attrs", o.drop_attrs, "attributes to drop before encoding")->delimiter(',');
  cmd->add_option("--kpi", o.kpi_kind,
                  "kpi kind: remaining-time | activity-occurrence | attribute-value-occurrence | "
                  "path-time | attribute-delta");
  cmd->add_option("--kpi-activity", o.kpi_activity, "activity for activity-occurrence");
  cmd->add_option("--kpi-attribute", o.kpi_attribute, "attribute for attribute-value-occurrence");
  cmd->add_option("--kpi-value", o.kpi_value, "value for attribute-value-occurrence");
  cmd->add_option("--kpi-source", o.kpi_source, "source activity for path-time");
  cmd->add_option("--kpi-target", o.kpi_target, "target activity for path-time / attribute-delta");
  cmd->add_option("--kpi-due", o.kpi_due, "due-date attribute for attribute-delta");
}

PipelineConfig build_config(const CommonOpts& o) {
  PipelineConfig config;
  if (!o.config_path.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_text_file(o.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw_parse("config file: " + std::string(e.what()));
    }
    config = PipelineConfig::from_json(j);
  }
  if (!o.input.empty()) config.input_path = o.input;
  if (!o.format.empty()) config.format = o.format;
  if (!o.csv_schema.empty()) config.csv_schema_path = o.csv_schema;
  if (!o.viewpoint.empty()) config.viewpoint = o.viewpoint;
  if (!o.mode.empty()) {
    auto mode = unfold_mode_from_name(o.mode);
    if (!mode) throw_validation("unknown mode '" + o.mode + "'");
    config.mode = *mode;
  }
  if (o.max_hops) config.max_hops = o.max_hops;
  if (o.seed) config.split_seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (!o.drop_attrs.empty()) config.preprocess.drop_attributes = o.drop_attrs;
  if (!o.kpi_kind.empty()) {
    auto kind = kpi_kind_from_name(o.kpi_kind);
    if (!kind) throw_validation("unknown kpi kind '" + o.kpi_kind + "'");
    config.kpi.kind = *kind;
  }
  if (!o.kpi_activity.empty()) config.kpi.activity = o.kpi_activity;
  if (!o.kpi_attribute.empty()) config.kpi.attribute = o.kpi_attribute;
  if (!o.kpi_value.empty()) config.kpi.value = o.kpi_value;
  if (!o.kpi_source.empty()) config.kpi.source_activity = o.kpi_source;
  if (!o.kpi_target.empty()) config.kpi.target_activity = o.kpi_target;
  if (!o.kpi_due.empty()) config.kpi.due_attribute = o.kpi_due;
  return config;
}

int run_stage(const CommonOpts& opts, Stage stage) {
  const PipelineConfig config = build_config(opts);
  const RunReport report = run_pipeline(config, stage);
  if (stage == Stage::validate) {
    if (report.violations.empty()) {
      std::cout << "log is valid\n";
      return 0;
    }
    for (const auto& v : report.violations) {
      std::cout << "[" << v.rule << "] " << v.subject << ": " << v.detail << "\n";
    }
    return 2;
  }
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"object-centric process prediction toolkit"};
  app.require_subcommand(1);

  std::map<std::string, Stage> stage_commands{
      {"validate", Stage::validate}, {"unfold", Stage::unfold},   {"encode", Stage::encode},
      {"label", Stage::label},       {"train", Stage::train},     {"evaluate", Stage::evaluate},
      {"explain", Stage::explain},   {"run", Stage::run}};
  std::map<std::string, CommonOpts> opts;
  std::map<std::string, CLI::App*> cmds;
  for (auto& [name, stage] : stage_commands) {
    CLI::App* cmd = app.add_subcommand(
        name, name == "run" ? "run the full pipeline" : "run the pipeline up to the " + name + " stage");
    add_common(cmd, opts[name]);
    cmds[name] = cmd;
  }

  // generate
  SyntheticSpec gen_spec;
  std::string gen_format = "csv";
  std::string gen_out = "synthetic";
  CLI::App* gen = app.add_subcommand("generate", "generate a synthetic procurement log");
  gen->add_option("--requisitions", gen_spec.n_requisitions, "number of requisition cases");
  gen->add_option("--reqs-per-contract", gen_spec.requisitions_per_contract,
                  "requisitions sharing one contract");
  gen->add_option("--min-orders", gen_spec.min_orders, "minimum orders per requisition");
  gen->add_option("--max-orders", gen_spec.max_orders, "maximum orders per requisition");
  gen->add_option("--receipts-per-invoice", gen_spec.max_receipts_per_invoice,
                  "maximum receipts grouped into one invoice");
  gen->add_option("--paired-order-prob", gen_spec.paired_order_prob,
                  "chance an order creation event carries two orders");
  gen->add_option("--contract-order-prob", gen_spec.contract_order_prob,
                  "chance of an extra contract-only order");
  gen->add_option("--order-coeff-hours", gen_spec.order_count_coeff_hours,
                  "planted closing delay per related order (hours)");
  gen->add_option("--weight-coeff-hours", gen_spec.weight_coeff_hours,
                  "planted closing delay per mean weight unit (hours)");
  gen->add_option("--noise-hours", gen_spec.noise_hours, "closing delay noise (hours, stddev)");
  gen->add_option("--base-cycle-days", gen_spec.base_cycle_days, "base requisition cycle (days)");
  gen->add_option("--seed", gen_spec.seed, "generator seed");
  gen->add_option("--format", gen_format, "output format: csv | ocel-json");
  gen->add_option("--out", gen_out, "output path prefix (writes <out>.csv/.schema or <out>.json)");

  // plot
  std::string plot_in, plot_out;
  int plot_top_k = 12;
  CLI::App* plot = app.add_subcommand("plot", "redraw a boxplot SVG from a bucket stats CSV");
  plot->add_option("--in", plot_in, "boxplot csv produced by the explain stage")->required();
  plot->add_option("--out", plot_out, "svg output path")->required();
  plot->add_option("--top-k", plot_top_k, "number of buckets to draw");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& [name, stage] : stage_commands) {
      if (cmds[name]->parsed()) return run_stage(opts[name], stage);
    }
    if (gen->parsed()) {
      const ObjectCentricLog log = generate_synthetic(gen_spec);
      if (gen_format == "ocel-json") {
        detail::write_text_file(gen_out + ".json", write_ocel_json(log));
        std::cout << gen_out << ".json\n";
      } else if (gen_format == "csv") {
        const FlatCsvSchema schema = default_csv_schema(log);
        detail::write_text_file(gen_out + ".csv", write_flat_csv(log, &schema));
        detail::write_text_file(gen_out + ".schema", schema.to_sidecar());
        std::cout << gen_out << ".csv\n" << gen_out << ".schema\n";
      } else {
        throw_validation("unknown output format '" + gen_format + "'");
      }
      return 0;
    }
    if (plot->parsed()) {
      const auto table = detail::parse_csv(detail::read_text_file(plot_in));
      std::vector<LabeledBox> boxes;
      for (std::size_t r = 1; r < table.rows.size() && static_cast<int>(boxes.size()) < plot_top_k; ++r) {
        const auto& row = table.rows[r];
        if (row.size() < 8) throw_parse("boxplot csv row " + std::to_string(r + 1) + ": too few columns");
        BoxStats s;
        auto num = [&](std::size_t i) {
          auto v = detail::parse_double(row[i]);
          if (!v) throw_parse("boxplot csv row " + std::to_string(r + 1) + ": bad number '" + row[i] + "'");
          return *v;
        };
        s.min = num(1);
        s.q1 = num(2);
        s.median = num(3);
        s.q3 = num(4);
        s.max = num(5);
        s.mean = num(6);
        s.count = static_cast<std::size_t>(num(7));
        boxes.push_back({row[0], s});
      }
      detail::write_text_file(plot_out, boxplot_svg_from_stats(boxes));
      std::cout << plot_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
