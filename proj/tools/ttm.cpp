#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ttm/config.hpp"
#include "ttm/error.hpp"
#include "ttm/server.hpp"
#include "ttm/simulator.hpp"
#include "ttm/ttransformer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_output(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ttm::Error(ttm::Errc::Io, "cannot create " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
  if (!out) throw ttm::Error(ttm::Errc::Io, "cannot write " + (dir / name).string());
  out << std::setprecision(17);
  return out;
}

void apply_overrides(ttm::KeyValueConfig& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

// Scenario file plus command-line overrides; flags win over the file.
struct ScenarioArgs {
  std::string path;
  std::vector<std::string> sets;
  std::string regime;
  std::int64_t seed = -1;
  std::int64_t ticks = -1;

  void add_to(CLI::App& cmd, bool with_positional = true) {
    if (with_positional) cmd.add_option("scenario", path, "Scenario config file")->required();
    cmd.add_option("--seed", seed, "Override scenario.seed")->check(CLI::NonNegativeNumber);
    cmd.add_option("--regime", regime, "high_control | low_control | ttm_heuristic | ttm_learned");
    cmd.add_option("--ticks", ticks, "Override scenario.ticks")->check(CLI::PositiveNumber);
    cmd.add_option("--set", sets, "Override any config key (key=value), repeatable");
  }

  ttm::sim::ScenarioConfig load(const std::string& file) const {
    auto cfg = ttm::KeyValueConfig::load(file);
    apply_overrides(cfg, sets);
    if (!regime.empty()) cfg.set("scenario.regime", regime);
    if (seed >= 0) cfg.set("scenario.seed", std::to_string(seed));
    if (ticks > 0) cfg.set("scenario.ticks", std::to_string(ticks));
    return ttm::sim::scenario_from_config(cfg);
  }
};

int cmd_simulate(const ScenarioArgs& args, const fs::path& out_dir) {
  const auto cfg = args.load(args.path);
  const auto report = ttm::sim::run_scenario(cfg);
  ttm::sim::write_report(std::cout << std::setprecision(17), report);
  auto rep = open_output(out_dir, "report.txt");
  ttm::sim::write_report(rep, report);
  auto traj = open_output(out_dir, "trajectory.csv");
  ttm::sim::write_trajectory_csv(traj, report);
  return kExitOk;
}

int cmd_gen_data(const ScenarioArgs& args, std::size_t n, std::size_t seq_len, const fs::path& out_dir) {
  const auto cfg = args.load(args.path);
  const auto data = ttm::sim::generate_dataset(cfg, n, seq_len, cfg.room.heuristic);
  auto out = open_output(out_dir, "dataset.data");
  data.write(out);
  std::cout << "samples = " << data.size() << "\nseq_len = " << data.seq_len()
            << "\nfile = " << (out_dir / "dataset.data").string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string dataset;
  std::string config;
  std::string profile;
  std::int64_t seed = -1;
  double learning_rate = 0.0;
  std::int64_t epochs = 0;
  std::int64_t batch_size = 0;
  std::int64_t patience = 0;
  double train_fraction = 0.0;
};

int cmd_train(const TrainArgs& a, const fs::path& out_dir) {
  ttm::KeyValueConfig cfg;
  if (!a.config.empty()) cfg = ttm::KeyValueConfig::load(a.config);
  const std::string profile = a.profile.empty() ? cfg.get_string("train.profile", "desk") : a.profile;
  if (profile != "desk" && profile != "paper") throw UsageError("--profile must be desk or paper");

  ttm::nn::ModelConfig model = profile == "paper" ? ttm::nn::ModelConfig::paper() : ttm::nn::ModelConfig::desk();
  ttm::nn::TrainConfig tc = profile == "paper" ? ttm::nn::TrainConfig::paper() : ttm::nn::TrainConfig::desk();
  tc.learning_rate = a.learning_rate > 0 ? a.learning_rate : cfg.get_double("train.learning_rate", tc.learning_rate);
  tc.max_epochs = static_cast<std::size_t>(
      a.epochs > 0 ? a.epochs : cfg.get_int("train.max_epochs", static_cast<std::int64_t>(tc.max_epochs)));
  tc.batch_size = static_cast<std::size_t>(
      a.batch_size > 0 ? a.batch_size : cfg.get_int("train.batch_size", static_cast<std::int64_t>(tc.batch_size)));
  tc.patience = static_cast<std::size_t>(
      a.patience > 0 ? a.patience : cfg.get_int("train.patience", static_cast<std::int64_t>(tc.patience)));
  tc.seed = static_cast<std::uint64_t>(a.seed >= 0 ? a.seed : cfg.get_int("train.seed", 1));
  tc.train_fraction = a.train_fraction > 0 ? a.train_fraction : cfg.get_double("train.train_fraction", tc.train_fraction);
  cfg.require_all_used();

  const auto data = ttm::nn::Dataset::load(a.dataset);
  model.input_dim = data.feature_dim();
  model.seq_len = data.seq_len();
  auto result = ttm::nn::train(ttm::nn::ModelWeights::initialize(model, ttm::derive_seed(tc.seed, 7)), tc, data);

  open_output(out_dir, "weights.bin").close();
  ttm::nn::save_weights(result.weights, out_dir / "weights.bin");
  {
    auto hist = open_output(out_dir, "history.csv");
    hist << "epoch,train_mse,test_mse\n";
    for (const auto& r : result.history) hist << r.epoch << ',' << r.train_mse << ',' << r.test_mse << '\n';
  }
  {
    auto f = open_output(out_dir, "train_split.data");
    data.subset(result.split.train).write(f);
  }
  {
    auto f = open_output(out_dir, "test_split.data");
    data.subset(result.split.test).write(f);
  }
  std::ostringstream summary;
  summary << std::setprecision(17) << "profile = " << profile << "\nsamples = " << data.size()
          << "\ntrain_samples = " << result.split.train.size() << "\ntest_samples = " << result.split.test.size()
          << "\nparameters = " << result.weights.parameter_count() << "\nbest_epoch = " << result.best_epoch
          << "\nlast_epoch = " << result.last_epoch << "\ninitial_test_mse = " << result.history.front().test_mse
          << "\nfinal_train_mse = " << result.final_train_mse << "\nfinal_test_mse = " << result.final_test_mse
          << "\n";
  auto f = open_output(out_dir, "train_summary.txt");
  f << summary.str();
  std::cout << summary.str();
  return kExitOk;
}

int cmd_eval(const std::string& weights_path, const std::string& dataset_path, const std::string& out_dir) {
  const auto weights = ttm::nn::load_weights(weights_path);
  const auto data = ttm::nn::Dataset::load(dataset_path);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double mse = ttm::nn::evaluate_mse(weights, data, all);
  std::ostringstream text;
  text << std::setprecision(17) << "samples = " << data.size() << "\nmse = " << mse << "\n";
  std::cout << text.str();
  if (!out_dir.empty()) open_output(out_dir, "eval.txt") << text.str();
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, double eps, double tolerance, std::size_t samples) {
  const auto model = ttm::nn::ModelConfig::tiny();
  const auto weights = ttm::nn::ModelWeights::initialize(model, seed);
  const auto data = ttm::nn::random_dataset(samples, model.seq_len, model.input_dim, ttm::derive_seed(seed, 1));
  std::vector<std::size_t> batch(data.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const auto report = ttm::nn::gradient_check(weights, data, batch, eps);
  std::cout << std::setprecision(6);
  for (const auto& t : report.tensors) {
    std::cout << std::left << std::setw(28) << t.tensor << " entries " << std::setw(6) << t.checked
              << " max_rel_error " << t.max_rel_error << "\n";
  }
  std::cout << "checked = " << report.checked << "\nmax_rel_error = " << report.max_rel_error << "\n";
  if (report.max_rel_error >= tolerance) {
    std::cerr << "gradcheck: max relative error " << report.max_rel_error << " exceeds " << tolerance << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

struct CompareRow {
  ttm::sim::SimulationReport a, b;
};

int cmd_compare(const ScenarioArgs& base, const std::string& path_a, const std::string& path_b, std::size_t seeds,
                std::size_t jobs, const fs::path& out_dir) {
  const auto cfg_a = base.load(path_a);
  const auto cfg_b = base.load(path_b);
  std::vector<CompareRow> rows(seeds);
  auto run_one = [&](std::size_t i) {
    auto a = cfg_a;
    auto b = cfg_b;
    a.seed = cfg_a.seed + i;
    b.seed = cfg_b.seed + i;
    rows[i] = {ttm::sim::run_scenario(a), ttm::sim::run_scenario(b)};
  };
  jobs = std::max<std::size_t>(1, jobs);
  for (std::size_t start = 0; start < seeds; start += jobs) {
    std::vector<std::future<void>> pending;
    for (std::size_t i = start; i < std::min(seeds, start + jobs); ++i) {
      pending.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, run_one, i));
    }
    for (auto& p : pending) p.get();
  }

  auto csv = open_output(out_dir, "compare.csv");
  csv << "seed_a,seed_b,atmosphere_a,atmosphere_b,mute_rate_a,mute_rate_b,gini_a,gini_b,freedom_a,freedom_b,"
         "tasks_a,tasks_b\n";
  std::size_t atm_wins = 0;
  std::size_t mute_higher = 0;
  double sum[6] = {};
  for (const auto& r : rows) {
    csv << r.a.seed << ',' << r.b.seed << ',' << r.a.mean_atmosphere << ',' << r.b.mean_atmosphere << ','
        << r.a.mute_event_rate << ',' << r.b.mute_event_rate << ',' << r.a.participation_gini << ','
        << r.b.participation_gini << ',' << r.a.interactive_freedom << ',' << r.b.interactive_freedom << ','
        << r.a.tasks_completed << ',' << r.b.tasks_completed << '\n';
    atm_wins += r.a.mean_atmosphere > r.b.mean_atmosphere;
    mute_higher += r.a.mute_event_rate > r.b.mute_event_rate;
    sum[0] += r.a.mean_atmosphere;
    sum[1] += r.b.mean_atmosphere;
    sum[2] += r.a.mute_event_rate;
    sum[3] += r.b.mute_event_rate;
    sum[4] += r.a.participation_gini;
    sum[5] += r.b.participation_gini;
  }
  const double k = static_cast<double>(std::max<std::size_t>(seeds, 1));
  std::ostringstream table;
  table << std::fixed << std::setprecision(4);
  table << std::left << std::setw(22) << "metric" << std::setw(16) << cfg_a.name << std::setw(16) << cfg_b.name
        << "\n";
  table << std::setw(22) << "regime" << std::setw(16) << to_string(cfg_a.regime) << std::setw(16)
        << to_string(cfg_b.regime) << "\n";
  table << std::setw(22) << "mean_atmosphere" << std::setw(16) << sum[0] / k << std::setw(16) << sum[1] / k << "\n";
  table << std::setw(22) << "mute_event_rate" << std::setw(16) << sum[2] / k << std::setw(16) << sum[3] / k << "\n";
  table << std::setw(22) << "participation_gini" << std::setw(16) << sum[4] / k << std::setw(16) << sum[5] / k
        << "\n";
  table << "A above B on atmosphere in " << atm_wins << "/" << seeds << " seeds\n";
  table << "A above B on mute rate in " << mute_higher << "/" << seeds << " seeds\n";
  std::cout << table.str();
  open_output(out_dir, "compare.txt") << table.str();
  return kExitOk;
}

int cmd_serve(const std::string& listen, const std::string& config, const std::string& data_dir,
              const std::vector<std::string>& sets) {
  auto cfg = ttm::KeyValueConfig::load(config);
  apply_overrides(cfg, sets);
  ttm::service::ServerOptions opts;
  opts.hub.room_template = ttm::room_settings_from_config(cfg);
  cfg.require_all_used();
  opts.hub.data_dir = data_dir;
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects host:port");
  opts.address = listen.substr(0, colon);
  try {
    const int port = std::stoi(listen.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    opts.port = static_cast<std::uint16_t>(port);
  } catch (const std::logic_error&) {
    throw UsageError("bad port in --listen '" + listen + "'");
  }
  ttm::service::Server server(opts);
  const auto port = server.bind();
  std::cout << "listening on " << opts.address << ":" << port << std::endl;
  server.run(true);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tribal Theater Model: simulate, train and serve regulated chat rooms", "ttm"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::string out_dir = ".";

  ScenarioArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write report.txt and trajectory.csv");
  sim_args.add_to(*simulate);
  simulate->add_option("--out", out_dir, "Output directory");

  ScenarioArgs gen_args;
  std::size_t gen_n = 2000;
  std::size_t gen_seq = 16;
  auto* gen = app.add_subcommand("gen-data", "Generate a Heuristic-labeled dataset (dataset.data)");
  gen_args.add_to(*gen);
  gen->add_option("-n,--samples", gen_n, "Number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--seq-len", gen_seq, "History length per sample")->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir, "Output directory");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the transformer (weights.bin, history.csv, splits)");
  train->add_option("dataset", train_args.dataset, "Dataset file")->required();
  train->add_option("--profile", train_args.profile, "desk | paper");
  train->add_option("--config", train_args.config, "Config file with train.* keys");
  train->add_option("--seed", train_args.seed, "Split, order and init seed")->check(CLI::NonNegativeNumber);
  train->add_option("--lr", train_args.learning_rate, "Learning rate")->check(CLI::PositiveNumber);
  train->add_option("--epochs", train_args.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch-size", train_args.batch_size, "Minibatch size")->check(CLI::PositiveNumber);
  train->add_option("--patience", train_args.patience, "Early stopping patience")->check(CLI::PositiveNumber);
  train->add_option("--train-fraction", train_args.train_fraction, "Share of samples used for training")
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--out", out_dir, "Output directory");

  std::string eval_weights, eval_data, eval_out;
  auto* eval = app.add_subcommand("eval", "Mean squared error of a weight file on a dataset");
  eval->add_option("weights", eval_weights, "Weight file")->required();
  eval->add_option("dataset", eval_data, "Dataset file")->required();
  eval->add_option("--out", eval_out, "Also write eval.txt here");

  std::string listen = "127.0.0.1:8080";
  std::string serve_config = TTM_DEFAULT_SERVE_CONFIG;
  std::string serve_data;
  std::vector<std::string> serve_sets;
  auto* serve = app.add_subcommand("serve", "Run the WebSocket chat service");
  serve->add_option("--listen", listen, "host:port (port 0 picks a free one)");
  serve->add_option("--config", serve_config, "Room template config");
  serve->add_option("--data-dir", serve_data, "Persist rooms under this directory");
  serve->add_option("--set", serve_sets, "Override any config key (key=value), repeatable");

  ScenarioArgs cmp_args;
  std::string cmp_a, cmp_b;
  std::size_t cmp_seeds = 10;
  std::size_t cmp_jobs = 1;
  auto* compare = app.add_subcommand("compare", "Compare two scenarios over consecutive seeds");
  compare->add_option("scenario_a", cmp_a, "First scenario")->required();
  compare->add_option("scenario_b", cmp_b, "Second scenario")->required();
  cmp_args.add_to(*compare, false);
  compare->add_option("--seeds", cmp_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  compare->add_option("--jobs", cmp_jobs, "Seeds run in parallel")->check(CLI::PositiveNumber);
  compare->add_option("--out", out_dir, "Output directory");

  std::uint64_t gc_seed = 1;
  double gc_eps = 1e-4;
  double gc_tol = 1e-3;
  std::size_t gc_samples = 3;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every transformer gradient");
  gradcheck->add_option("--seed", gc_seed, "Weight and data seed");
  gradcheck->add_option("--eps", gc_eps, "Central difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", gc_tol, "Largest accepted relative error")->check(CLI::PositiveNumber);
  gradcheck->add_option("--samples", gc_samples, "Batch size")->check(CLI::PositiveNumber);

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "ttm: " << e.what() << "\n" << "run 'ttm --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_args, out_dir);
    if (*gen) return cmd_gen_data(gen_args, gen_n, gen_seq, out_dir);
    if (*train) return cmd_train(train_args, out_dir);
    if (*eval) return cmd_eval(eval_weights, eval_data, eval_out);
    if (*serve) return cmd_serve(listen, serve_config, serve_data, serve_sets);
    if (*compare) return cmd_compare(cmp_args, cmp_a, cmp_b, cmp_seeds, cmp_jobs, out_dir);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_eps, gc_tol, gc_samples);
  } catch (const UsageError& e) {
    std::cerr << "ttm: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ttm::Error& e) {
    std::cerr << "ttm: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "ttm: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
