#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocpred/core.hpp"
#include "ocpred/encode.hpp"
#include "ocpred/gbdt.hpp"
#include "ocpred/ingest.hpp"
#include "ocpred/kpi.hpp"
#include "ocpred/shapley.hpp"
#include "ocpred/unfold.hpp"

namespace ocpred {

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open '" + path.string() + "'");
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_internal("cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw_internal("write failed for '" + path.string() + "'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

inline nlohmann::json gbdt_config_to_json(const GbdtConfig& c) {
  return nlohmann::json{{"n_trees", c.n_trees},
                        {"max_depth", c.max_depth},
                        {"learning_rate", c.learning_rate},
                        {"min_samples_leaf", c.min_samples_leaf},
                        {"loss", loss_name(c.loss)},
                        {"seed", c.seed},
                        {"categorical_strategy", c.categorical_strategy},
                        {"early_stopping_patience", c.early_stopping_patience}};
}

inline GbdtConfig gbdt_config_from_json(const nlohmann::json& j) {
  GbdtConfig c;
  c.n_trees = j.value("n_trees", c.n_trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
  if (j.contains("loss")) {
    auto loss = loss_from_name(j.at("loss").get<std::string>());
    if (!loss) throw_parse("config: unknown loss '" + j.at("loss").get<std::string>() + "'");
    c.loss = *loss;
  }
  c.seed = j.value("seed", c.seed);
  c.categorical_strategy = j.value("categorical_strategy", c.categorical_strategy);
  c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
  return c;
}

inline std::vector<GbdtConfig> default_grid() {
  std::vector<GbdtConfig> grid;
  for (const int depth : {3, 6}) {
    for (const double lr : {0.05, 0.1}) {
      for (const int min_leaf : {5, 20}) {
        GbdtConfig c;
        c.n_trees = 200;
        c.max_depth = depth;
        c.learning_rate = lr;
        c.min_samples_leaf = min_leaf;
        c.early_stopping_patience = 30;
        grid.push_back(c);
      }
    }
  }
  return grid;
}

struct PreprocessConfig {
  std::vector<std::string> drop_attributes;  // explicit domain-knowledge drops
  double sparse_threshold = 0.8;
  bool drop_constant = true;
  double pareto_coverage = 0.8;   // <= 0 disables
  int pareto_min_distinct = 10;   // only reduce attributes at least this wide
};

struct ExplainConfig {
  bool enabled = true;
  int max_instances = 200;
  int n_permutations = 500;
  int background_size = 500;
  int exact_max_features = 12;
  int max_buckets = 5;
  int top_k = 12;
};

struct PipelineConfig {
  std::string input_path;
  std::string format = "csv";  // "csv" | "ocel-json"
  std::string csv_schema_path;
  std::string viewpoint;
  UnfoldMode mode = UnfoldMode::object_centric_aggregated;
  std::optional<int> max_hops;
  KpiSpec kpi;
  PreprocessConfig preprocess;
  EncodeOptions encode;
  std::vector<GbdtConfig> grid = default_grid();
  std::uint64_t split_seed = 1;
  int workers = 1;
  ExplainConfig explain;
  std::string out_dir;  // empty: $OCPRED_OUT or "ocpred-out"

  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

inline PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.input_path = j.value("input", std::string());
  c.format = j.value("format", std::string("csv"));
  c.csv_schema_path = j.value("csv_schema", std::string());
  c.viewpoint = j.value("viewpoint", std::string());
  if (j.contains("mode")) {
    auto mode = unfold_mode_from_name(j.at("mode").get<std::string>());
    if (!mode) throw_parse("config: unknown mode '" + j.at("mode").get<std::string>() + "'");
    c.mode = *mode;
  }
  if (j.contains("max_hops") && !j.at("max_hops").is_null()) c.max_hops = j.at("max_hops").get<int>();
  if (j.contains("kpi")) {
    const auto& k = j.at("kpi");
    auto kind = kpi_kind_from_name(k.value("kind", "remaining-time"));
    if (!kind) throw_parse("config: unknown kpi kind '" + k.value("kind", "") + "'");
    c.kpi.kind = *kind;
    c.kpi.activity = k.value("activity", std::string());
    c.kpi.attribute = k.value("attribute", std::string());
    c.kpi.value = k.value("value", std::string());
    c.kpi.source_activity = k.value("source_activity", std::string());
    c.kpi.target_activity = k.value("target_activity", std::string());
    c.kpi.due_attribute = k.value("due_attribute", std::string());
    c.kpi.due_format = k.value("due_format", c.kpi.due_format);
  }
  if (j.contains("preprocess")) {
    const auto& p = j.at("preprocess");
    if (p.contains("drop_attributes")) {
      c.preprocess.drop_attributes = p.at("drop_attributes").get<std::vector<std::string>>();
    }
    c.preprocess.sparse_threshold = p.value("sparse_threshold", c.preprocess.sparse_threshold);
    c.preprocess.drop_constant = p.value("drop_constant", c.preprocess.drop_constant);
    c.preprocess.pareto_coverage = p.value("pareto_coverage", c.preprocess.pareto_coverage);
    c.preprocess.pareto_min_distinct = p.value("pareto_min_distinct", c.preprocess.pareto_min_distinct);
  }
  if (j.contains("encode")) {
    auto fn = aggregate_fn_from_name(j.at("encode").value("aggregate_fn", "mean"));
    if (!fn) throw_parse("config: unknown aggregate_fn");
    c.encode.aggregate_fn = *fn;
  }
  if (j.contains("grid")) {
    c.grid.clear();
    for (const auto& g : j.at("grid")) c.grid.push_back(gbdt_config_from_json(g));
    if (c.grid.empty()) throw_parse("config: grid must not be empty");
  }
  c.split_seed = j.value("split_seed", c.split_seed);
  c.workers = j.value("workers", c.workers);
  if (j.contains("explain")) {
    const auto& e = j.at("explain");
    c.explain.enabled = e.value("enabled", c.explain.enabled);
    c.explain.max_instances = e.value("max_instances", c.explain.max_instances);
    c.explain.n_permutations = e.value("n_permutations", c.explain.n_permutations);
    c.explain.background_size = e.value("background_size", c.explain.background_size);
    c.explain.exact_max_features = e.value("exact_max_features", c.explain.exact_max_features);
    c.explain.max_buckets = e.value("max_buckets", c.explain.max_buckets);
    c.explain.top_k = e.value("top_k", c.explain.top_k);
  }
  c.out_dir = j.value("out_dir", std::string());
  return c;
}

inline nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json grid_json = nlohmann::json::array();
  for (const auto& g : grid) grid_json.push_back(gbdt_config_to_json(g));
  nlohmann::json j{
      {"input", input_path},
      {"format", format},
      {"csv_schema", csv_schema_path},
      {"viewpoint", viewpoint},
      {"mode", unfold_mode_name(mode)},
      {"kpi",
       {{"kind", kpi_kind_name(kpi.kind)},
        {"activity", kpi.activity},
        {"attribute", kpi.attribute},
        {"value", kpi.value},
        {"source_activity", kpi.source_activity},
        {"target_activity", kpi.target_activity},
        {"due_attribute", kpi.due_attribute},
        {"due_format", kpi.due_format}}},
      {"preprocess",
       {{"drop_attributes", preprocess.drop_attributes},
        {"sparse_threshold", preprocess.sparse_threshold},
        {"drop_constant", preprocess.drop_constant},
        {"pareto_coverage", preprocess.pareto_coverage},
        {"pareto_min_distinct", preprocess.pareto_min_distinct}}},
      {"encode", {{"aggregate_fn", aggregate_fn_name(encode.aggregate_fn)}}},
      {"grid", std::move(grid_json)},
      {"split_seed", split_seed},
      {"workers", workers},
      {"explain",
       {{"enabled", explain.enabled},
        {"max_instances", explain.max_instances},
        {"n_permutations", explain.n_permutations},
        {"background_size", explain.background_size},
        {"exact_max_features", explain.exact_max_features},
        {"max_buckets", explain.max_buckets},
        {"top_k", explain.top_k}}},
      {"out_dir", out_dir}};
  if (max_hops) j["max_hops"] = *max_hops;
  else j["max_hops"] = nullptr;
  return j;
}

inline std::string resolve_out_dir(const PipelineConfig& config) {
  if (!config.out_dir.empty()) return config.out_dir;
  if (const char* env = std::getenv("OCPRED_OUT"); env && *env) return env;
  return "ocpred-out";
}

// ---------------------------------------------------------------------------
// Pipeline stages.
// ---------------------------------------------------------------------------

enum class Stage { validate, unfold, encode, label, train, evaluate, explain, run };

inline std::optional<Stage> stage_from_name(std::string_view name) {
  if (name == "validate") return Stage::validate;
  if (name == "unfold") return Stage::unfold;
  if (name == "encode") return Stage::encode;
  if (name == "label") return Stage::label;
  if (name == "train") return Stage::train;
  if (name == "evaluate") return Stage::evaluate;
  if (name == "explain") return Stage::explain;
  if (name == "run") return Stage::run;
  return std::nullopt;
}

struct RunReport {
  std::vector<ValidationIssue> violations;
  std::string metric_name;
  double test_metric = 0.0;
  double validation_metric = 0.0;
  std::size_t n_traces = 0;
  std::size_t n_instances = 0;
  std::size_t n_train_rows = 0, n_val_rows = 0, n_test_rows = 0;
  std::vector<std::string> dropped_attributes;
  GbdtConfig best_config;
  std::map<std::string, std::string> artifacts;

  nlohmann::json to_json() const {
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& v : violations) {
      issues.push_back({{"rule", v.rule}, {"subject", v.subject}, {"detail", v.detail}});
    }
    return nlohmann::json{{"violations", std::move(issues)},
                          {"metric", metric_name},
                          {"test_metric", test_metric},
                          {"validation_metric", validation_metric},
                          {"n_traces", n_traces},
                          {"n_instances", n_instances},
                          {"n_train_rows", n_train_rows},
                          {"n_val_rows", n_val_rows},
                          {"n_test_rows", n_test_rows},
                          {"dropped_attributes", dropped_attributes},
                          {"best_config", gbdt_config_to_json(best_config)},
                          {"artifacts", artifacts}};
  }
};

// Reruns with an equal manifest produce byte-identical dataset CSVs and model
// JSON, so the manifest carries no wall-clock state.
inline nlohmann::json make_manifest(const PipelineConfig& config) {
  const nlohmann::json canonical = config.to_json();
  return nlohmann::json{{"tool", "ocpred"},
                        {"version", kVersion},
                        {"config_hash", detail::hex64(detail::fnv1a(canonical.dump()))},
                        {"split_seed", config.split_seed},
                        {"config", canonical}};
}

// Executes ingest -> preprocess -> unfold -> encode -> label -> split ->
// grid search -> evaluate -> explain, stopping after `upto`. Any failure
// removes the files written by this run and rethrows with the stage name.
inline RunReport run_pipeline(const PipelineConfig& config, Stage upto = Stage::run,
                              std::shared_ptr<const ObjectCentricLog> preloaded = nullptr) {
  namespace fs = std::filesystem;
  RunReport report;
  const fs::path out_dir = resolve_out_dir(config);
  std::vector<fs::path> written;
  std::string stage_name = "ingest";

  auto emit = [&](const std::string& name, std::string_view content) {
    fs::create_directories(out_dir);
    const fs::path path = out_dir / name;
    detail::write_text_file(path, content);
    written.push_back(path);
    report.artifacts[name] = path.string();
  };
  auto finish = [&]() -> RunReport& {
    emit("manifest.json", make_manifest(config).dump(2) + "\n");
    return report;
  };

  try {
    // ingest
    std::shared_ptr<const ObjectCentricLog> log;
    if (preloaded) {
      log = std::move(preloaded);
    } else {
      const std::string bytes = detail::read_text_file(config.input_path);
      if (config.format == "ocel-json") {
        log = std::make_shared<const ObjectCentricLog>(parse_ocel_json(bytes));
      } else if (config.format == "csv") {
        FlatCsvSchema schema;
        if (!config.csv_schema_path.empty()) {
          schema = FlatCsvSchema::from_sidecar(detail::read_text_file(config.csv_schema_path));
        } else {
          throw_validation("csv input requires a schema sidecar (csv_schema)");
        }
        log = std::make_shared<const ObjectCentricLog>(parse_flat_csv(bytes, schema));
      } else {
        throw_validation("unknown input format '" + config.format + "'");
      }
    }

    stage_name = "validate";
    report.violations = validate_log(*log);
    if (upto == Stage::validate) return report;
    if (!report.violations.empty()) {
      throw_validation("log fails validation with " + std::to_string(report.violations.size()) +
                       " issue(s); first: [" + report.violations.front().rule + "] " +
                       report.violations.front().subject);
    }
    if (!log->registry.object_types().count(config.viewpoint)) {
      throw_validation("viewpoint '" + config.viewpoint + "' is not an object type of the log");
    }
    validate_kpi_spec(config.kpi, *log);

    stage_name = "preprocess";
    auto working = std::make_shared<ObjectCentricLog>(*log);
    if (!config.preprocess.drop_attributes.empty()) {
      *working = drop_attributes(*working, config.preprocess.drop_attributes);
      report.dropped_attributes = config.preprocess.drop_attributes;
    }
    {
      auto result = drop_sparse_attributes(*working, config.preprocess.sparse_threshold);
      *working = std::move(result.log);
      report.dropped_attributes.insert(report.dropped_attributes.end(), result.dropped.begin(),
                                       result.dropped.end());
    }
    if (config.preprocess.drop_constant) {
      auto result = drop_constant_attributes(*working);
      *working = std::move(result.log);
      report.dropped_attributes.insert(report.dropped_attributes.end(), result.dropped.begin(),
                                       result.dropped.end());
    }
    if (config.preprocess.pareto_coverage > 0.0) {
      for (const auto& [name, kind] : std::map<std::string, AttrKind>(working->attribute_schema)) {
        if (kind != AttrKind::categorical) continue;
        std::set<std::string> distinct;
        for (const auto& e : working->events) {
          if (const AttributeValue* v = e.attr(name)) distinct.insert(v->as_text());
        }
        if (static_cast<int>(distinct.size()) >= config.preprocess.pareto_min_distinct) {
          *working = pareto_reduce(*working, name, config.preprocess.pareto_coverage);
        }
      }
    }
    std::shared_ptr<const ObjectCentricLog> prepared = std::move(working);

    stage_name = "unfold";
    UnfoldOptions unfold_options;
    unfold_options.mode = config.mode;
    unfold_options.max_hops = config.max_hops;
    const SingleIdLog unfolded = unfold_log(prepared, config.viewpoint, unfold_options);
    report.n_traces = unfolded.traces.size();
    emit("unfolded.csv", write_single_id_csv(unfolded));
    if (upto == Stage::unfold) return finish();

    stage_name = "encode";
    const FeatureSchema schema = build_schema(unfolded, config.encode);
    Dataset dataset = build_dataset(unfolded, schema);
    emit("schema.json", schema_to_json(schema).dump(2) + "\n");
    if (upto == Stage::encode) {
      report.n_instances = dataset.rows.size();
      emit("dataset.csv", write_dataset_csv(dataset));
      return finish();
    }

    stage_name = "label";
    dataset = label_dataset(std::move(dataset), unfolded, config.kpi);
    report.n_instances = dataset.rows.size();
    emit("dataset.csv", write_dataset_csv(dataset));
    if (upto == Stage::label) return finish();

    stage_name = "train";
    SplitResult split = split_dataset(dataset, config.split_seed);
    report.n_train_rows = split.train.rows.size();
    report.n_val_rows = split.validation.rows.size();
    report.n_test_rows = split.test.rows.size();
    GridResult tuned = grid_search(split.train, split.validation,
                                   std::span<const GbdtConfig>(config.grid.data(), config.grid.size()),
                                   config.workers);
    report.best_config = tuned.best_config;
    report.validation_metric = tuned.validation_metric;
    emit("model.json", tuned.model.to_json().dump(2) + "\n");
    if (upto == Stage::train) return finish();

    stage_name = "evaluate";
    const bool classification = dataset.classification;
    report.metric_name = classification ? "f1" : "mae_days";
    const auto predictions = predict_dataset(tuned.model, split.test);
    {
      std::string csv;
      detail::append_csv_row(csv, {"case_id", "prefix_len", "prediction", "actual"});
      for (std::size_t i = 0; i < split.test.rows.size(); ++i) {
        const auto& row = split.test.rows[i];
        detail::append_csv_row(csv, {row.case_id, std::to_string(row.prefix_len),
                                     detail::fmt_double(predictions[i]), detail::fmt_double(*row.y)});
      }
      emit("predictions.csv", csv);
    }
    const double metric = evaluation_metric(tuned.model, split.test);
    report.test_metric = classification ? 1.0 - metric : metric;  // report F1, not 1-F1
    {
      nlohmann::json metrics{{"metric", report.metric_name},
                             {"test", report.test_metric},
                             {"validation", classification ? 1.0 - report.validation_metric
                                                           : report.validation_metric},
                             {"kpi", kpi_kind_name(config.kpi.kind)},
                             {"mode", unfold_mode_name(config.mode)},
                             {"viewpoint", config.viewpoint},
                             {"n_train_rows", report.n_train_rows},
                             {"n_val_rows", report.n_val_rows},
                             {"n_test_rows", report.n_test_rows},
                             {"best_config", gbdt_config_to_json(report.best_config)}};
      emit("metrics.json", metrics.dump(2) + "\n");
    }
    const bool want_explain = upto == Stage::explain || (upto == Stage::run && config.explain.enabled);
    if (!want_explain) return finish();

    stage_name = "explain";
    {
      detail::Rng rng(config.split_seed * 0x9e3779b97f4a7c15ull + 1);
      std::vector<std::vector<AttributeValue>> background;
      {
        std::vector<std::size_t> ids(split.train.rows.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        rng.shuffle(ids);
        const std::size_t take =
            std::min<std::size_t>(static_cast<std::size_t>(config.explain.background_size), ids.size());
        std::vector<std::size_t> chosen(ids.begin(), ids.begin() + static_cast<long>(take));
        std::sort(chosen.begin(), chosen.end());
        for (const std::size_t i : chosen) background.push_back(split.train.rows[i].x);
      }
      std::vector<std::size_t> explain_rows(split.test.rows.size());
      for (std::size_t i = 0; i < explain_rows.size(); ++i) explain_rows[i] = i;
      rng.shuffle(explain_rows);
      const std::size_t take = std::min<std::size_t>(
          static_cast<std::size_t>(config.explain.max_instances), explain_rows.size());
      explain_rows.resize(take);
      std::sort(explain_rows.begin(), explain_rows.end());

      const GbdtModel& model = tuned.model;
      Predictor predictor = [&model](std::span<const AttributeValue> x) { return model.predict(x); };

      std::vector<std::vector<AttributeValue>> xs;
      std::vector<ShapleyVector> vectors;
      const bool exact = schema.size() <= static_cast<std::size_t>(config.explain.exact_max_features);
      for (std::size_t k = 0; k < explain_rows.size(); ++k) {
        const auto& row = split.test.rows[explain_rows[k]];
        ShapleyVector sv =
            exact ? exact_shapley(predictor, row.x, background, config.explain.exact_max_features)
                  : mc_shapley(predictor, row.x, background, config.explain.n_permutations,
                               config.split_seed + 1000 + k);
        xs.push_back(row.x);
        vectors.push_back(std::move(sv));
      }

      // bucket boundaries from the training distribution
      std::map<std::string, std::vector<double>> thresholds;
      for (std::size_t f = 0; f < schema.size(); ++f) {
        if (schema.features[f].kind != FeatureKind::numeric) continue;
        std::vector<std::pair<double, double>> pairs;
        for (const auto& row : split.train.rows) {
          if (row.x[f].is_number()) pairs.emplace_back(row.x[f].as_number(), *row.y);
        }
        auto w = discretize_feature(std::move(pairs), config.explain.max_buckets);
        if (!w.empty()) thresholds[schema.features[f].name] = std::move(w);
      }

      const auto buckets = aggregate_explanations(schema, xs, vectors, thresholds);
      {
        std::string csv;
        detail::append_csv_row(csv, {"case_id", "prefix_len", "feature", "value", "phi"});
        for (std::size_t k = 0; k < explain_rows.size(); ++k) {
          const auto& row = split.test.rows[explain_rows[k]];
          for (std::size_t f = 0; f < schema.size(); ++f) {
            detail::append_csv_row(csv, {row.case_id, std::to_string(row.prefix_len),
                                         schema.features[f].name, row.x[f].display(),
                                         detail::fmt_double(vectors[k].phi[f])});
          }
        }
        emit("explanations.csv", csv);
      }
      emit("boxplot.csv", boxplot_csv(buckets, config.explain.top_k));
      emit("boxplot.svg", boxplot_svg(buckets, config.explain.top_k));
    }

    return finish();
  } catch (const Error& e) {
    for (const auto& path : written) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    throw Error(e.kind(), "stage '" + stage_name + "': " + e.what());
  } catch (const std::exception& e) {
    for (const auto& path : written) {
      std::error_code ec;
      fs::remove(path, ec);
    }
    throw Error(ErrorKind::internal, "stage '" + stage_name + "': " + e.what());
  }
}

}  // namespace ocpred
