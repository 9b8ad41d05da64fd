#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "insyn/checkpoint.hpp"
#include "insyn/config.hpp"
#include "insyn/error.hpp"
#include "insyn/evaluation.hpp"
#include "insyn/preprocess.hpp"
#include "insyn/rng.hpp"
#include "insyn/scene.hpp"
#include "insyn/synth.hpp"
#include "insyn/training.hpp"

namespace fs = std::filesystem;
using namespace insyn;

namespace {

struct GlobalOptions {
  std::string workdir = ".";
  std::string config_file;
  std::vector<std::string> overrides;
  std::vector<std::string> ablations;
  std::optional<uint64_t> seed;
  std::optional<double> radius;
  std::optional<int> k;
  std::optional<int> jobs;
};

std::string resolve(const GlobalOptions& g, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(g.workdir) / p).string();
}

RunConfig resolve_config(const GlobalOptions& g) {
  RunConfig config;
  if (!g.config_file.empty()) apply_config_file(config, resolve(g, g.config_file));
  for (const std::string& o : g.overrides) apply_override(config, o);
  if (g.seed) apply_override(config, "seed=" + std::to_string(*g.seed));
  if (g.radius) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "radius=%.9g", *g.radius);
    apply_override(config, buf);
  }
  if (g.k) apply_override(config, "k=" + std::to_string(*g.k));
  if (g.jobs) apply_override(config, "jobs=" + std::to_string(*g.jobs));
  for (const std::string& a : g.ablations) {
    if (a == "wo-rp") apply_override(config, "ablation.use_region_partition=false");
    else if (a == "wo-is") apply_override(config, "ablation.use_interaction_state=false");
    else if (a == "sos") apply_override(config, "ablation.use_ssos=false");
    else fail("bad-config", "unknown ablation '" + a + "' (wo-rp|wo-is|sos)");
  }
  validate(config);
  return config;
}

nlohmann::json stats_json(const FeatureStats& stats) {
  return {{"min", stats.min}, {"max", stats.max}};
}

FeatureStats stats_from_json(const nlohmann::json& j) {
  FeatureStats stats;
  for (int r = 0; r < kNumRegions; ++r) {
    stats.min[r] = j.at("min").at(r);
    stats.max[r] = j.at("max").at(r);
  }
  return stats;
}

bool stats_equal(const FeatureStats& a, const FeatureStats& b) {
  return a.min == b.min && a.max == b.max;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

ColumnSpec parse_columns(const std::string& csv) {
  auto parts = split_list(csv);
  if (parts.size() != 4) fail("bad-config", "--columns needs frame,ped,x,y indices");
  ColumnSpec spec;
  spec.frame = std::stoi(parts[0]);
  spec.ped = std::stoi(parts[1]);
  spec.x = std::stoi(parts[2]);
  spec.y = std::stoi(parts[3]);
  return spec;
}

int windowable_count(const Scene& scene) {
  int count = 0;
  for (const auto& [ped, track] : scene.tracks)
    count += std::max(0, static_cast<int>(track.positions.size()) - (kWindowSteps - 1));
  return count;
}

std::vector<SampleWindow> augment_windows(const std::vector<SampleWindow>& base, bool rot,
                                          bool scale) {
  std::vector<SampleWindow> out;
  for (const SampleWindow& w : base) {
    std::vector<SampleWindow> variants;
    if (rot)
      for (int k = 0; k < 4; ++k) variants.push_back(rotate_window(w, k));
    else
      variants.push_back(w);
    if (scale) {
      size_t n = variants.size();
      for (size_t i = 0; i < n; ++i) variants.push_back(scale_window(variants[i], 2.0));
    }
    out.insert(out.end(), variants.begin(), variants.end());
  }
  return out;
}

nlohmann::json checkpoint_meta(const RunConfig& config, const FeatureStats& stats,
                               const std::vector<std::string>& trained) {
  return {{"format", "insyn-checkpoint"},
          {"version", 1},
          {"model", config.model.to_json()},
          {"ablations", config.train.ablations.to_json()},
          {"radius", config.radius},
          {"stats", stats_json(stats)},
          {"model_hash", model_hash(config)},
          {"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"trained", trained}};
}

struct LoadedModels {
  std::unique_ptr<GeneratorModel> generator;
  std::unique_ptr<CvaeModel> cvae;
  FeatureStats stats;
  nlohmann::json meta;
};

LoadedModels load_models(const std::string& path, const RunConfig& config) {
  nlohmann::json meta = read_checkpoint_meta(path);
  if (meta.value("format", "") != "insyn-checkpoint")
    fail("bad-format", "'" + path + "' is not an insyn checkpoint");
  std::string want = model_hash(config);
  std::string have = meta.value("model_hash", "");
  if (want != have)
    fail("hash-mismatch", "checkpoint model hash " + have + " does not match configured " +
                              want + "; align model/ablation/radius settings");
  LoadedModels out;
  ModelConfig mc = ModelConfig::from_json(meta.at("model"));
  AblationFlags flags = AblationFlags::from_json(meta.at("ablations"));
  out.generator = std::make_unique<GeneratorModel>(mc, flags, 0);
  out.cvae = std::make_unique<CvaeModel>(mc, 0);
  load_checkpoint(path, {{"encoder", &out.generator->encoder_params()},
                         {"generator", &out.generator->generator_params()},
                         {"cvae", &out.cvae->params()}});
  out.stats = stats_from_json(meta.at("stats"));
  out.meta = std::move(meta);
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("io", "cannot write '" + path + "'");
  out << text;
}

int run(int argc, char** argv) {
  CLI::App app{"InSyn pedestrian trajectory prediction pipeline"};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--workdir", g.workdir, "Base directory for relative paths");
  app.add_option("--config", g.config_file, "Config file (key = value lines)");
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--radius", g.radius, "Neighbor radius in meters");
  app.add_option("--k", g.k, "Samples per window for best-of-K");
  app.add_option("--jobs", g.jobs, "Worker threads for evaluation");
  app.add_option("--ablation", g.ablations, "Ablation: wo-rp, wo-is or sos (repeatable)")
      ->delimiter(',');

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert raw trajectory files to scene files");
  std::vector<std::string> ingest_inputs;
  std::string ingest_output = "scene.txt";
  std::string ingest_columns = "0,1,2,3";
  int ingest_stride = 1;
  double ingest_dt = 0.4;
  ingest->add_option("--input", ingest_inputs, "Raw whitespace-delimited files")->required();
  ingest->add_option("--output", ingest_output, "Scene file to write");
  ingest->add_option("--columns", ingest_columns, "frame,ped,x,y column indices");
  ingest->add_option("--stride", ingest_stride, "Keep frames with frame %% stride == 0");
  ingest->add_option("--dt", ingest_dt, "Seconds per kept step");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic scenes");
  std::string synth_kind = "mixed";
  int synth_scenes = 1;
  int synth_steps = 40;
  double synth_noise = 0.0;
  double synth_speed = 1.2;
  int synth_groups = 4;
  std::string synth_prefix = "synth";
  synth_cmd->add_option("--kind", synth_kind, "lone|insync|headon|crossing|mixed");
  synth_cmd->add_option("--scenes", synth_scenes, "Number of scenes");
  synth_cmd->add_option("--steps", synth_steps, "Steps per scene");
  synth_cmd->add_option("--noise", synth_noise, "Gaussian position noise std-dev");
  synth_cmd->add_option("--speed", synth_speed, "Walking speed m/s");
  synth_cmd->add_option("--groups", synth_groups, "Sub-scenarios per mixed scene");
  synth_cmd->add_option("--prefix", synth_prefix, "Output scene file prefix");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Window scenes into model-ready samples");
  std::string prep_train, prep_eval;
  std::string prep_train_out = "train.samples", prep_eval_out = "eval.samples";
  std::string prep_augment;
  prep->add_option("--train-scenes", prep_train, "Comma-separated training scene files")
      ->required();
  prep->add_option("--eval-scenes", prep_eval, "Comma-separated evaluation scene files");
  prep->add_option("--output-train", prep_train_out, "Training sample file");
  prep->add_option("--output-eval", prep_eval_out, "Evaluation sample file");
  prep->add_option("--augment", prep_augment, "rot,scale (training set only)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the generator and the goal sampler");
  std::string train_samples = "train.samples";
  std::string train_ckpt = "insyn.ckpt";
  std::string train_curve = "loss_curve.csv";
  std::string train_component = "both";
  train_cmd->add_option("--samples", train_samples, "Preprocessed training samples");
  train_cmd->add_option("--output", train_ckpt, "Checkpoint file");
  train_cmd->add_option("--curve", train_curve, "Loss curve CSV");
  train_cmd->add_option("--component", train_component, "generator|cvae|both");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Best-of-K evaluation of a checkpoint");
  std::string eval_samples = "eval.samples";
  std::string eval_ckpt = "insyn.ckpt";
  std::string eval_report = "report.csv";
  std::string eval_plot;
  std::string eval_goal_mode = "sampled";
  bool eval_oracle = false;
  eval_cmd->add_option("--samples", eval_samples, "Preprocessed evaluation samples");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  eval_cmd->add_option("--report", eval_report, "Metric report CSV");
  eval_cmd->add_option("--plot-dump", eval_plot, "Per-sample goal/trajectory dump CSV");
  eval_cmd->add_option("--goal-mode", eval_goal_mode, "sampled|truth");
  eval_cmd->add_flag("--oracle", eval_oracle, "Inject the ground truth as one sample");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict one window of one scene");
  std::string predict_scene;
  long long predict_agent = 0;
  int predict_start = 0;
  std::string predict_ckpt = "insyn.ckpt";
  std::string predict_output;
  predict_cmd->add_option("--scene", predict_scene, "Scene file")->required();
  predict_cmd->add_option("--agent", predict_agent, "Pedestrian id")->required();
  predict_cmd->add_option("--start", predict_start, "First observed step")->required();
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Checkpoint file");
  predict_cmd->add_option("--output", predict_output, "Write the prediction here (else stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  RunConfig config = resolve_config(g);
  echo_config(std::cout, config);

  if (ingest->parsed()) {
    for (const std::string& input : ingest_inputs) {
      auto records = parse_dataset_file(resolve(g, input), parse_columns(ingest_columns));
      Scene scene = build_scene(std::move(records), ingest_stride, ingest_dt);
      std::string out_path = resolve(g, ingest_output);
      write_scene_file(out_path, scene);
      std::cout << "ingested " << input << " -> " << ingest_output << ": pedestrians "
                << scene.tracks.size() << ", steps " << scene.num_steps() << ", windowable "
                << windowable_count(scene) << "\n";
    }
    return 0;
  }

  if (synth_cmd->parsed()) {
    synth::ScenarioSpec spec;
    spec.kind = synth::scenario_kind_from_string(synth_kind);
    spec.steps = synth_steps;
    spec.noise = synth_noise;
    spec.speed = synth_speed;
    spec.radius = config.radius;
    spec.mixed_groups = synth_groups;
    for (int i = 0; i < synth_scenes; ++i) {
      spec.seed = derive_seed(config.seed, "synth-" + std::to_string(i));
      auto labeled = synth::generate(spec);
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.txt", synth_prefix.c_str(), i);
      write_scene_file(resolve(g, name), labeled.scene);
      std::cout << "wrote " << name << ": pedestrians " << labeled.scene.tracks.size()
                << ", steps " << labeled.scene.num_steps() << ", windowable "
                << windowable_count(labeled.scene) << "\n";
    }
    return 0;
  }

  if (prep->parsed()) {
    RegionMode mode = config.train.ablations.region_mode();
    auto window_files = [&](const std::string& csv) {
      std::vector<SampleWindow> windows;
      for (const std::string& file : split_list(csv)) {
        Scene scene = read_scene_file(resolve(g, file));
        std::string id = fs::path(file).stem().string();
        auto w = window_scene(scene, config.radius, mode, id);
        windows.insert(windows.end(), w.begin(), w.end());
      }
      return windows;
    };

    std::vector<SampleWindow> train_windows = window_files(prep_train);
    if (train_windows.empty()) fail("empty-scene", "no training windows produced");
    bool rot = false, scale = false;
    for (const std::string& a : split_list(prep_augment)) {
      if (a == "rot") rot = true;
      else if (a == "scale") scale = true;
      else fail("bad-config", "unknown augmentation '" + a + "'");
    }
    train_windows = augment_windows(train_windows, rot, scale);
    FeatureStats stats = fit_stats(train_windows);
    std::vector<SampleWindow> train_norm;
    train_norm.reserve(train_windows.size());
    for (const SampleWindow& w : train_windows) train_norm.push_back(apply_stats(w, stats));
    write_samples_file(resolve(g, prep_train_out), train_norm, stats, config_hash(config));
    std::cout << "wrote " << prep_train_out << ": " << train_norm.size() << " windows\n";

    if (!prep_eval.empty()) {
      std::vector<SampleWindow> eval_windows = window_files(prep_eval);
      std::vector<SampleWindow> eval_norm;
      eval_norm.reserve(eval_windows.size());
      for (const SampleWindow& w : eval_windows) eval_norm.push_back(apply_stats(w, stats));
      write_samples_file(resolve(g, prep_eval_out), eval_norm, stats, config_hash(config));
      std::cout << "wrote " << prep_eval_out << ": " << eval_norm.size() << " windows\n";
    }
    return 0;
  }

  if (train_cmd->parsed()) {
    SampleFile samples = read_samples_file(resolve(g, train_samples));
    if (samples.samples.empty()) fail("empty-dataset", "no training windows in sample file");
    bool do_generator = train_component == "both" || train_component == "generator";
    bool do_cvae = train_component == "both" || train_component == "cvae";
    if (!do_generator && !do_cvae)
      fail("bad-config", "--component must be generator, cvae or both");

    std::vector<LossCurvePoint> curve;
    std::vector<std::string> trained;
    std::string ckpt_path = resolve(g, train_ckpt);
    nlohmann::json meta = checkpoint_meta(config, samples.stats, {});

    auto generator = std::make_unique<GeneratorModel>(
        config.model, config.train.ablations, derive_seed(config.seed, "generator-init"));
    auto cvae =
        std::make_unique<CvaeModel>(config.model, derive_seed(config.seed, "cvae-init"));

    auto save = [&](const std::string& path) {
      save_checkpoint(path, meta, {{"encoder", &generator->encoder_params()},
                                   {"generator", &generator->generator_params()},
                                   {"cvae", &cvae->params()}});
    };

    if (do_generator) {
      auto points = train_generator(samples.samples, config.train, *generator,
                                    [&](int epoch) {
                                      char suffix[32];
                                      std::snprintf(suffix, sizeof(suffix), ".e%04d", epoch);
                                      save(ckpt_path + suffix);
                                    });
      curve.insert(curve.end(), points.begin(), points.end());
      trained.push_back("generator");
    }
    if (do_cvae) {
      auto points = train_seqcvae(samples.samples, config.train, *cvae,
                                  [&](int epoch) {
                                    char suffix[32];
                                    std::snprintf(suffix, sizeof(suffix), ".e%04d", epoch);
                                    save(ckpt_path + ".cvae" + suffix);
                                  });
      curve.insert(curve.end(), points.begin(), points.end());
      trained.push_back("cvae");
    }

    meta = checkpoint_meta(config, samples.stats, trained);
    save(ckpt_path);
    std::ofstream curve_out(resolve(g, train_curve), std::ios::binary);
    if (!curve_out) fail("io", "cannot write '" + train_curve + "'");
    write_loss_curve(curve_out, curve);
    std::cout << "wrote " << train_ckpt << " and " << train_curve << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    SampleFile samples = read_samples_file(resolve(g, eval_samples));
    LoadedModels models = load_models(resolve(g, eval_ckpt), config);
    if (!stats_equal(models.stats, samples.stats))
      fail("hash-mismatch", "sample-file normalization stats differ from the checkpoint's");

    EvalOptions options;
    options.k = config.k;
    options.seed = config.seed;
    options.jobs = config.jobs;
    options.inject_truth = eval_oracle;
    options.with_plot_dump = !eval_plot.empty();
    if (eval_goal_mode == "truth") options.goal_mode = GoalMode::Truth;
    else if (eval_goal_mode != "sampled") fail("bad-config", "--goal-mode must be sampled|truth");

    MetricReport report = evaluate_split(*models.generator, *models.cvae, samples.samples,
                                         options);
    std::ofstream out(resolve(g, eval_report), std::ios::binary);
    if (!out) fail("io", "cannot write '" + eval_report + "'");
    write_report(out, report, config_hash(config));
    if (!eval_plot.empty()) {
      std::ofstream plot_out(resolve(g, eval_plot), std::ios::binary);
      if (!plot_out) fail("io", "cannot write '" + eval_plot + "'");
      write_plot_dump(plot_out, report.plot, config_hash(config));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "mean ade %.6f fde %.6f ide %.6f over %zu windows\n",
                  report.mean_ade, report.mean_fde, report.mean_ide, report.rows.size());
    std::cout << buf;
    return 0;
  }

  if (predict_cmd->parsed()) {
    Scene scene = read_scene_file(resolve(g, predict_scene));
    LoadedModels models = load_models(resolve(g, predict_ckpt), config);
    AblationFlags flags = models.generator->flags();

    PedId agent = predict_agent;
    for (int s = predict_start; s < predict_start + kObsSteps; ++s)
      if (!scene.present(agent, s))
        fail("agent-not-present", "agent " + std::to_string(agent) +
                                      " does not cover the observation window");
    bool has_truth = true;
    for (int s = predict_start + kObsSteps; s < predict_start + kWindowSteps; ++s)
      if (!scene.present(agent, s)) has_truth = false;

    SampleWindow w;
    w.scene = fs::path(predict_scene).stem().string();
    w.agent = agent;
    w.start = predict_start;
    w.origin = scene.position(agent, predict_start);
    auto states = extract_walking_states(scene, agent, predict_start, kObsSteps, config.radius,
                                         flags.region_mode());
    for (int t = 0; t < kObsSteps; ++t) {
      w.obs[t] = states[t];
      w.obs[t].position.x -= w.origin.x;
      w.obs[t].position.y -= w.origin.y;
    }
    if (has_truth)
      for (int t = 0; t < kFutureSteps; ++t) {
        Position p = scene.position(agent, predict_start + kObsSteps + t);
        w.future[t] = Position{p.x - w.origin.x, p.y - w.origin.y};
      }
    w = apply_stats(w, models.stats);

    uint64_t sample_seed = derive_seed(config.seed, w.scene + "/" + std::to_string(w.agent) +
                                                        "/" + std::to_string(w.start));
    std::vector<Position> goals = models.cvae->sample(w, config.k, sample_seed);
    PredictionSet pset;
    pset.goals = goals;
    for (const Position& goal : goals)
      pset.trajectories.push_back(models.generator->decode(w, goal));

    std::ostringstream text;
    char buf[256];
    text << "# insyn-predict 1\n# config " << config_hash(config) << "\n";
    text << "# scene " << w.scene << " agent " << agent << " start " << predict_start << "\n";
    for (size_t k = 0; k < pset.goals.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "goal,%zu,%.6f,%.6f\n", k,
                    pset.goals[k].x + w.origin.x, pset.goals[k].y + w.origin.y);
      text << buf;
    }
    for (size_t k = 0; k < pset.trajectories.size(); ++k)
      for (int t = 0; t < kFutureSteps; ++t) {
        std::snprintf(buf, sizeof(buf), "traj,%zu,%d,%.6f,%.6f\n", k, t,
                      pset.trajectories[k][t].x + w.origin.x,
                      pset.trajectories[k][t].y + w.origin.y);
        text << buf;
      }
    if (has_truth) {
      BestOfK best = best_of_k(pset, w.future);
      std::snprintf(buf, sizeof(buf), "metrics,ade,%.6f,fde,%.6f,ide,%.6f\n", best.ade,
                    best.fde, best.ide);
      text << buf;
    }
    if (predict_output.empty()) std::cout << text.str();
    else write_text_file(resolve(g, predict_output), text.str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    static const std::set<std::string> usage_kinds = {
        "bad-config", "io",          "malformed-line", "non-finite",       "bad-format",
        "empty-scene", "bad-spec",   "empty-dataset",  "stage-dependency", "hash-mismatch",
        "bad-index",  "duplicate-record", "agent-not-present"};
    return usage_kinds.count(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
