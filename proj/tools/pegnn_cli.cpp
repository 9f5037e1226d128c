// Command-line front end: train / eval / encode / moran / synth over the
// pegnn library. Machine-readable outputs only (JSON and CSV); exit codes
// are 0 success, 1 usage, 2 data/validation error, 3 numerical abort.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pegnn/pegnn.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
  pegnn::TrainConfig train;
  double test_fraction = 0.2;
  pegnn::CsvSchema schema;
  std::string data_path;
  std::string out_dir = "pegnn_out";
  bool strict_csv = true;
};

pegnn::Backbone parse_backbone(const std::string& s) {
  if (s == "gcn") return pegnn::Backbone::kGcn;
  if (s == "sage") return pegnn::Backbone::kSage;
  throw pegnn::ValidationError("unknown backbone '" + s + "' (expected gcn|sage)");
}

pegnn::EdgeWeighting parse_weighting(const std::string& s) {
  if (s == "binary") return pegnn::EdgeWeighting::kBinary;
  if (s == "inverse_distance") return pegnn::EdgeWeighting::kInverseDistance;
  throw pegnn::ValidationError("unknown edge_weighting '" + s +
                               "' (expected binary|inverse_distance)");
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw pegnn::ValidationError("unknown config key '" + it.key() + "' in " + where);
}

RunConfig parse_run_config(const json& j) {
  reject_unknown_keys(
      j,
      {"k", "n_batch", "tsteps", "lr", "lambda", "learned_loss_weights", "seed",
       "backbone", "use_pe", "emb_dim", "sigma_min", "sigma_max", "num_scales",
       "dropout", "hidden_dim", "edge_weighting", "test_fraction", "data",
       "out_dir", "strict_csv"},
      "config");

  RunConfig cfg;
  pegnn::TrainConfig& t = cfg.train;
  if (j.contains("k")) t.k = j.at("k").get<std::size_t>();
  if (j.contains("n_batch")) t.n_batch = j.at("n_batch").get<std::size_t>();
  if (j.contains("tsteps")) t.tsteps = j.at("tsteps").get<std::size_t>();
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("lambda")) t.lambda = j.at("lambda").get<double>();
  if (j.contains("learned_loss_weights"))
    t.learned_loss_weights = j.at("learned_loss_weights").get<bool>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("backbone")) t.backbone = parse_backbone(j.at("backbone"));
  if (j.contains("use_pe")) t.use_pe = j.at("use_pe").get<bool>();
  if (j.contains("emb_dim")) t.emb_dim = j.at("emb_dim").get<std::size_t>();
  if (j.contains("sigma_min")) t.sigma_min = j.at("sigma_min").get<double>();
  if (j.contains("sigma_max")) t.sigma_max = j.at("sigma_max").get<double>();
  if (j.contains("num_scales")) t.num_scales = j.at("num_scales").get<std::size_t>();
  if (j.contains("dropout")) t.dropout = j.at("dropout").get<double>();
  if (j.contains("hidden_dim")) t.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  if (j.contains("edge_weighting"))
    t.edge_weighting = parse_weighting(j.at("edge_weighting"));
  if (j.contains("test_fraction")) cfg.test_fraction = j.at("test_fraction").get<double>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("strict_csv")) cfg.strict_csv = j.at("strict_csv").get<bool>();

  if (j.contains("data")) {
    const json& d = j.at("data");
    reject_unknown_keys(d, {"path", "lon_col", "lat_col", "target_col", "feature_cols"},
                        "config.data");
    if (d.contains("path")) cfg.data_path = d.at("path").get<std::string>();
    if (d.contains("lon_col")) cfg.schema.lon_col = d.at("lon_col").get<std::string>();
    if (d.contains("lat_col")) cfg.schema.lat_col = d.at("lat_col").get<std::string>();
    if (d.contains("target_col"))
      cfg.schema.target_col = d.at("target_col").get<std::string>();
    if (d.contains("feature_cols"))
      cfg.schema.feature_cols = d.at("feature_cols").get<std::vector<std::string>>();
  }
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  const pegnn::TrainConfig& t = cfg.train;
  return json{
      {"k", t.k},
      {"n_batch", t.n_batch},
      {"tsteps", t.tsteps},
      {"lr", t.lr},
      {"lambda", t.lambda},
      {"learned_loss_weights", t.learned_loss_weights},
      {"seed", t.seed},
      {"backbone", t.backbone == pegnn::Backbone::kGcn ? "gcn" : "sage"},
      {"use_pe", t.use_pe},
      {"emb_dim", t.emb_dim},
      {"sigma_min", t.sigma_min},
      {"sigma_max", t.sigma_max},
      {"num_scales", t.num_scales},
      {"dropout", t.dropout},
      {"hidden_dim", t.hidden_dim},
      {"edge_weighting",
       t.edge_weighting == pegnn::EdgeWeighting::kBinary ? "binary" : "inverse_distance"},
      {"test_fraction", cfg.test_fraction},
      {"data",
       {{"path", cfg.data_path},
        {"lon_col", cfg.schema.lon_col},
        {"lat_col", cfg.schema.lat_col},
        {"target_col", cfg.schema.target_col},
        {"feature_cols", cfg.schema.feature_cols}}},
      {"out_dir", cfg.out_dir},
      {"strict_csv", cfg.strict_csv},
  };
}

json schema_to_json(const pegnn::CsvSchema& s) {
  return json{{"lon_col", s.lon_col},
              {"lat_col", s.lat_col},
              {"target_col", s.target_col},
              {"feature_cols", s.feature_cols}};
}

pegnn::CsvSchema schema_from_json(const json& j) {
  pegnn::CsvSchema s;
  s.lon_col = j.at("lon_col").get<std::string>();
  s.lat_col = j.at("lat_col").get<std::string>();
  s.target_col = j.at("target_col").get<std::string>();
  s.feature_cols = j.at("feature_cols").get<std::vector<std::string>>();
  return s;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  pegnn::check(in.good(), "cannot open file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw pegnn::ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

int cmd_train(const RunConfig& cfg) {
  pegnn::check(!cfg.data_path.empty(), "train: no dataset (set data.path or --data)");

  pegnn::Dataset ds = pegnn::load_csv(cfg.data_path, cfg.schema, cfg.strict_csv);
  pegnn::Split split =
      pegnn::train_test_split(ds.size(), cfg.test_fraction, cfg.train.seed);
  pegnn::Dataset normalized = pegnn::fit_apply_minmax(ds, split);
  pegnn::Dataset train_set = pegnn::subset(normalized, split.train);
  pegnn::Dataset test_set = pegnn::subset(normalized, split.test);

  const auto t0 = std::chrono::steady_clock::now();
  pegnn::TrainResult result = pegnn::train(train_set, cfg.train);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  pegnn::EvalMetrics metrics = pegnn::evaluate(result.model, test_set, cfg.train.k);
  result.report.final_metrics = metrics;

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  const json extra{{"k", cfg.train.k},
                   {"seed", cfg.train.seed},
                   {"normalizers", pegnn::normalizers_to_json(*normalized.norm)},
                   {"schema", schema_to_json(cfg.schema)}};
  pegnn::save_checkpoint(result.model, (fs::path(cfg.out_dir) / "checkpoint.json").string(),
                         extra);
  pegnn::write_report_csv(result.report,
                          (fs::path(cfg.out_dir) / "report.csv").string());

  const json metrics_json{{"mse", metrics.mse},
                          {"mae", metrics.mae},
                          {"config_echo", run_config_to_json(cfg)},
                          {"seed", cfg.train.seed},
                          {"wall_clock_s", wall_s}};
  std::ofstream mout(fs::path(cfg.out_dir) / "metrics.json");
  pegnn::check(mout.good(), "cannot write metrics.json in " + cfg.out_dir);
  mout << metrics_json.dump(2) << "\n";

  std::cout << "MSE=" << metrics.mse << " MAE=" << metrics.mae << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
  pegnn::LoadedCheckpoint ck = pegnn::load_checkpoint(model_path);
  pegnn::check(ck.config.contains("normalizers") && ck.config.contains("schema") &&
                   ck.config.contains("k"),
               "checkpoint lacks the pipeline state needed for eval "
               "(normalizers/schema/k)");
  const pegnn::CsvSchema schema = schema_from_json(ck.config.at("schema"));
  const pegnn::Normalizers norm = pegnn::normalizers_from_json(ck.config.at("normalizers"));
  pegnn::Dataset ds = pegnn::apply_minmax(pegnn::load_csv(data_path, schema), norm);
  pegnn::EvalMetrics m =
      pegnn::evaluate(ck.model, ds, ck.config.at("k").get<std::size_t>());
  std::cout << json{{"mse", m.mse}, {"mae", m.mae}}.dump(2) << "\n";
  return 0;
}

int cmd_encode(const std::string& model_path, const std::string& data_path,
               const std::string& out_path) {
  pegnn::LoadedCheckpoint ck = pegnn::load_checkpoint(model_path);
  pegnn::check(ck.model.config().use_pe,
               "encode: checkpoint was trained without a positional encoder");
  pegnn::check(ck.config.contains("normalizers") && ck.config.contains("schema"),
               "checkpoint lacks the pipeline state needed for encode");
  const pegnn::CsvSchema schema = schema_from_json(ck.config.at("schema"));
  const pegnn::Normalizers norm = pegnn::normalizers_from_json(ck.config.at("normalizers"));
  pegnn::Dataset ds = pegnn::apply_minmax(pegnn::load_csv(data_path, schema), norm);

  pegnn::Tape tape;
  pegnn::Tensor emb = ck.model.encoder().forward(tape, ds.coords_norm);

  std::ofstream out(out_path);
  pegnn::check(out.good(), "cannot open output file: " + out_path);
  const std::size_t d = ck.model.config().emb_dim;
  for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << "e" << j;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", emb.values()[i * d + j]);
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  pegnn::check(out.good(), "write failed: " + out_path);
  return 0;
}

int cmd_moran(const std::string& data_path, std::size_t k,
              const std::string& out_path, const pegnn::CsvSchema& schema) {
  pegnn::Dataset ds = pegnn::load_csv(data_path, schema);
  pegnn::SpatialGraph g = pegnn::knn_graph(ds.coords(), k);
  if (g.k_was_clamped())
    std::cerr << "note: k=" << k << " clamped to " << g.effective_k << " (n="
              << g.n << ")\n";
  pegnn::MoranResult result =
      pegnn::local_moran(ds.targets_raw(), pegnn::row_standardize(g));
  if (result.degenerate)
    std::cerr << "note: constant target variable; Moran's I is degenerate (all zeros)\n";

  std::ofstream out(out_path);
  pegnn::check(out.good(), "cannot open output file: " + out_path);
  out << "moran_i\n";
  char buf[32];
  for (double v : result.values) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << "\n";
  }
  pegnn::check(out.good(), "write failed: " + out_path);
  return 0;
}

int cmd_synth(std::size_t n, std::uint64_t seed, const std::string& out_path,
              const std::vector<double>& freqs, double noise) {
  pegnn::Dataset ds = pegnn::synth_generate(n, seed, freqs, noise);
  pegnn::save_csv(ds, out_path);
  return 0;
}

std::string one_line(std::string msg) {
  for (char& c : msg)
    if (c == '\n') c = ';';
  return msg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PE-GNN: graph neural networks for geographic point data"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model and write outputs");
  std::string config_path, data_flag, out_flag, backbone_flag;
  std::uint64_t seed_flag = 0;
  std::size_t k_flag = 0, tsteps_flag = 0, nbatch_flag = 0;
  double lambda_flag = 0.0, lr_flag = 0.0;
  bool use_pe_flag = true;
  train_cmd->add_option("--config", config_path, "JSON run configuration");
  train_cmd->add_option("--data", data_flag, "dataset CSV (overrides config)");
  train_cmd->add_option("--out", out_flag, "output directory (overrides config)");
  auto* opt_seed = train_cmd->add_option("--seed", seed_flag, "RNG seed");
  auto* opt_k = train_cmd->add_option("--k", k_flag, "kNN neighbors");
  auto* opt_lambda = train_cmd->add_option("--lambda", lambda_flag, "auxiliary weight");
  auto* opt_tsteps = train_cmd->add_option("--tsteps", tsteps_flag, "training steps");
  auto* opt_nbatch = train_cmd->add_option("--n-batch", nbatch_flag, "batch size");
  auto* opt_lr = train_cmd->add_option("--lr", lr_flag, "learning rate");
  auto* opt_backbone = train_cmd->add_option("--backbone", backbone_flag, "gcn|sage");
  auto* opt_use_pe =
      train_cmd->add_flag("--use-pe,!--no-pe", use_pe_flag, "positional encoder on/off");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_model, eval_data;
  eval_cmd->add_option("--model", eval_model, "checkpoint JSON")->required();
  eval_cmd->add_option("--data", eval_data, "dataset CSV")->required();

  // encode
  auto* encode_cmd = app.add_subcommand("encode", "dump positional-encoder embeddings");
  std::string enc_model, enc_data, enc_out;
  encode_cmd->add_option("--model", enc_model, "checkpoint JSON")->required();
  encode_cmd->add_option("--data", enc_data, "dataset CSV")->required();
  encode_cmd->add_option("--out", enc_out, "output CSV")->required();

  // moran
  auto* moran_cmd = app.add_subcommand("moran", "per-point local Moran's I");
  std::string moran_data, moran_out = "moran.csv";
  std::size_t moran_k = 5;
  pegnn::CsvSchema moran_schema;
  moran_cmd->add_option("--data", moran_data, "dataset CSV")->required();
  moran_cmd->add_option("--k", moran_k, "kNN neighbors");
  moran_cmd->add_option("--out", moran_out, "output CSV");
  moran_cmd->add_option("--lon-col", moran_schema.lon_col, "longitude column");
  moran_cmd->add_option("--lat-col", moran_schema.lat_col, "latitude column");
  moran_cmd->add_option("--target-col", moran_schema.target_col, "target column");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  std::size_t synth_n = 2000;
  std::uint64_t synth_seed = 7;
  std::string synth_out = "synth.csv";
  std::vector<double> synth_freqs = {1.0, 2.0, 3.0};
  double synth_noise = 0.05;
  synth_cmd->add_option("--n", synth_n, "number of points");
  synth_cmd->add_option("--seed", synth_seed, "RNG seed");
  synth_cmd->add_option("--out", synth_out, "output CSV");
  synth_cmd->add_option("--freqs", synth_freqs, "field frequencies")->delimiter(',');
  synth_cmd->add_option("--noise", synth_noise, "noise amplitude");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train_cmd->parsed()) {
      RunConfig cfg;
      if (!config_path.empty()) cfg = parse_run_config(load_json_file(config_path));
      if (!data_flag.empty()) cfg.data_path = data_flag;
      if (!out_flag.empty()) cfg.out_dir = out_flag;
      if (opt_seed->count()) cfg.train.seed = seed_flag;
      if (opt_k->count()) cfg.train.k = k_flag;
      if (opt_lambda->count()) cfg.train.lambda = lambda_flag;
      if (opt_tsteps->count()) cfg.train.tsteps = tsteps_flag;
      if (opt_nbatch->count()) cfg.train.n_batch = nbatch_flag;
      if (opt_lr->count()) cfg.train.lr = lr_flag;
      if (opt_backbone->count()) cfg.train.backbone = parse_backbone(backbone_flag);
      if (opt_use_pe->count()) cfg.train.use_pe = use_pe_flag;
      return cmd_train(cfg);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_model, eval_data);
    if (encode_cmd->parsed()) return cmd_encode(enc_model, enc_data, enc_out);
    if (moran_cmd->parsed())
      return cmd_moran(moran_data, moran_k, moran_out, moran_schema);
    if (synth_cmd->parsed())
      return cmd_synth(synth_n, synth_seed, synth_out, synth_freqs, synth_noise);
  } catch (const pegnn::NumericError& e) {
    std::cerr << "numerical error: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const pegnn::ValidationError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 0;
}
