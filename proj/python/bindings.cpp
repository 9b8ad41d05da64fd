#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "insyn/checkpoint.hpp"
#include "insyn/config.hpp"
#include "insyn/error.hpp"
#include "insyn/evaluation.hpp"
#include "insyn/preprocess.hpp"
#include "insyn/rng.hpp"
#include "insyn/scene.hpp"
#include "insyn/synth.hpp"
#include "insyn/training.hpp"

namespace py = pybind11;
using namespace insyn;

namespace {

using XY = std::pair<double, double>;

XY to_xy(const Position& p) { return {p.x, p.y}; }
Position to_pos(const XY& p) { return {p.first, p.second}; }

std::array<Position, kFutureSteps> to_traj(const std::vector<XY>& points) {
  if (points.size() != kFutureSteps)
    fail("shape-mismatch", "trajectory must have " + std::to_string(kFutureSteps) + " points");
  std::array<Position, kFutureSteps> out;
  for (int t = 0; t < kFutureSteps; ++t) out[t] = to_pos(points[t]);
  return out;
}

ModelConfig config_from_kwargs(int model_dim, int heads, int enc_layers, int dec_layers,
                               int ffn_dim, int neighbor_hidden, int cvae_hidden,
                               int cvae_latent) {
  ModelConfig cfg;
  cfg.model_dim = model_dim;
  cfg.heads = heads;
  cfg.enc_layers = enc_layers;
  cfg.dec_layers = dec_layers;
  cfg.ffn_dim = ffn_dim;
  cfg.neighbor_hidden = neighbor_hidden;
  cfg.cvae_hidden = cvae_hidden;
  cfg.cvae_latent = cvae_latent;
  cfg.cvae_cond_dim = std::max(2, cvae_hidden / 2);
  cfg.cvae_expand_hidden = std::max(2, cvae_latent / 4);
  cfg.cvae_expand_dim = cvae_latent;
  cfg.cvae_dec_hidden = cvae_hidden;
  return cfg;
}

// Generator + goal sampler + the normalization stats they were trained with.
struct Models {
  std::unique_ptr<GeneratorModel> generator;
  std::unique_ptr<CvaeModel> cvae;
  FeatureStats stats;
  std::vector<LossCurvePoint> curve;

  std::vector<XY> decode(const SampleWindow& w, const XY& goal) {
    auto traj = generator->decode(w, to_pos(goal));
    std::vector<XY> out;
    for (const Position& p : traj) out.push_back(to_xy(p));
    return out;
  }

  std::vector<XY> sample(const SampleWindow& w, int k, uint64_t seed) {
    std::vector<XY> out;
    for (const Position& g : cvae->sample(w, k, seed)) out.push_back(to_xy(g));
    return out;
  }

  py::dict evaluate(const std::vector<SampleWindow>& windows, int k, uint64_t seed,
                    const std::string& goal_mode, bool oracle, int jobs) {
    EvalOptions options;
    options.k = k;
    options.seed = seed;
    options.jobs = jobs;
    options.inject_truth = oracle;
    if (goal_mode == "truth") options.goal_mode = GoalMode::Truth;
    else if (goal_mode != "sampled") fail("bad-config", "goal_mode must be sampled|truth");
    MetricReport report = evaluate_split(*generator, *cvae, windows, options);

    py::list rows;
    for (const WindowMetrics& m : report.rows) {
      py::dict row;
      row["scene"] = m.scene;
      row["agent"] = m.agent;
      row["start"] = m.start;
      row["ade"] = m.best.ade;
      row["fde"] = m.best.fde;
      row["ide"] = m.best.ide;
      row["fde_min"] = m.best.fde_min;
      row["ide_min"] = m.best.ide_min;
      rows.append(row);
    }
    py::dict out;
    out["mean_ade"] = report.mean_ade;
    out["mean_fde"] = report.mean_fde;
    out["mean_ide"] = report.mean_ide;
    out["mean_fde_min"] = report.mean_fde_min;
    out["mean_ide_min"] = report.mean_ide_min;
    out["rows"] = rows;
    return out;
  }

  void save(const std::string& path) {
    nlohmann::json meta = {{"format", "insyn-checkpoint"},
                           {"version", 1},
                           {"model", generator->config().to_json()},
                           {"ablations", generator->flags().to_json()},
                           {"stats", {{"min", stats.min}, {"max", stats.max}}}};
    save_checkpoint(path, meta, {{"encoder", &generator->encoder_params()},
                                 {"generator", &generator->generator_params()},
                                 {"cvae", &cvae->params()}});
  }
};

Models load_models(const std::string& path) {
  nlohmann::json meta = read_checkpoint_meta(path);
  ModelConfig cfg = ModelConfig::from_json(meta.at("model"));
  AblationFlags flags = AblationFlags::from_json(meta.at("ablations"));
  Models models;
  models.generator = std::make_unique<GeneratorModel>(cfg, flags, 0);
  models.cvae = std::make_unique<CvaeModel>(cfg, 0);
  load_checkpoint(path, {{"encoder", &models.generator->encoder_params()},
                         {"generator", &models.generator->generator_params()},
                         {"cvae", &models.cvae->params()}});
  for (int r = 0; r < kNumRegions; ++r) {
    models.stats.min[r] = meta.at("stats").at("min").at(r);
    models.stats.max[r] = meta.at("stats").at("max").at(r);
  }
  return models;
}

Models train_models(const std::vector<SampleWindow>& windows, const FeatureStats& stats,
                    int epochs, int batch_size, double lr_generator, double lr_cvae,
                    double lambda1, double lambda2, double beta_kl, double clip, uint64_t seed,
                    bool use_region_partition, bool use_interaction_state, bool use_ssos,
                    const ModelConfig& cfg) {
  TrainConfig config;
  config.epochs = epochs;
  config.batch_size = batch_size;
  config.lr_generator = lr_generator;
  config.lr_cvae = lr_cvae;
  config.weights = {lambda1, lambda2, beta_kl};
  config.clip = clip;
  config.seed = seed;
  config.ablations = {use_region_partition, use_interaction_state, use_ssos};

  Models models;
  auto gen = train_generator(windows, config, cfg);
  auto cvae = train_seqcvae(windows, config, cfg);
  models.generator = std::move(gen.model);
  models.cvae = std::move(cvae.model);
  models.stats = stats;
  models.curve = std::move(gen.curve);
  models.curve.insert(models.curve.end(), cvae.curve.begin(), cvae.curve.end());
  return models;
}

}  // namespace

PYBIND11_MODULE(_insyn, m) {
  m.doc() = "Interaction-aware pedestrian trajectory prediction";

  py::register_exception<Error>(m, "InsynError");

  py::class_<Scene>(m, "Scene")
      .def_property_readonly("dt", [](const Scene& s) { return s.dt; })
      .def_property_readonly("num_steps", &Scene::num_steps)
      .def_property_readonly("pedestrians",
                             [](const Scene& s) {
                               std::vector<PedId> ids;
                               for (const auto& [ped, track] : s.tracks) ids.push_back(ped);
                               return ids;
                             })
      .def("present", &Scene::present, py::arg("ped"), py::arg("step"))
      .def("position",
           [](const Scene& s, PedId ped, int step) { return to_xy(s.position(ped, step)); })
      .def("neighbors",
           [](const Scene& s, int step, PedId agent, double radius) {
             std::vector<std::pair<PedId, XY>> out;
             for (const auto& [ped, pos] : neighbors_at(s, step, agent, radius))
               out.push_back({ped, to_xy(pos)});
             return out;
           },
           py::arg("step"), py::arg("agent"), py::arg("radius") = 2.0);

  py::class_<FeatureStats>(m, "FeatureStats")
      .def_property_readonly("min", [](const FeatureStats& s) { return s.min; })
      .def_property_readonly("max", [](const FeatureStats& s) { return s.max; });

  py::class_<SampleWindow>(m, "SampleWindow")
      .def_property_readonly("scene", [](const SampleWindow& w) { return w.scene; })
      .def_property_readonly("agent", [](const SampleWindow& w) { return w.agent; })
      .def_property_readonly("start", [](const SampleWindow& w) { return w.start; })
      .def_property_readonly("origin", [](const SampleWindow& w) { return to_xy(w.origin); })
      .def_property_readonly("normalized", [](const SampleWindow& w) { return w.normalized; })
      .def_property_readonly("goal", [](const SampleWindow& w) { return to_xy(w.goal()); })
      .def_property_readonly("obs_positions",
                             [](const SampleWindow& w) {
                               std::vector<XY> out;
                               for (const WalkingState& ws : w.obs)
                                 out.push_back(to_xy(ws.position));
                               return out;
                             })
      .def_property_readonly("future",
                             [](const SampleWindow& w) {
                               std::vector<XY> out;
                               for (const Position& p : w.future) out.push_back(to_xy(p));
                               return out;
                             })
      .def_property_readonly("interaction",
                             [](const SampleWindow& w) {
                               // per step: list of (state, distance) in LU,RU,LD,RD order
                               std::vector<std::vector<std::pair<int, double>>> out;
                               for (const WalkingState& ws : w.obs) {
                                 std::vector<std::pair<int, double>> step;
                                 for (const RegionSlot& slot : ws.interaction.slots)
                                   step.push_back({static_cast<int>(slot.state), slot.distance});
                                 out.push_back(step);
                               }
                               return out;
                             });

  m.def("read_scene", &read_scene_file, py::arg("path"));
  m.def("write_scene", [](const Scene& s, const std::string& path) {
    write_scene_file(path, s);
  });

  m.def("ingest",
        [](const std::string& path, std::tuple<int, int, int, int> columns, int stride,
           double dt) {
          ColumnSpec spec{std::get<0>(columns), std::get<1>(columns), std::get<2>(columns),
                          std::get<3>(columns)};
          return build_scene(parse_dataset_file(path, spec), stride, dt);
        },
        py::arg("path"), py::arg("columns") = std::make_tuple(0, 1, 2, 3),
        py::arg("stride") = 1, py::arg("dt") = 0.4,
        "Parse a whitespace-delimited trajectory export into a scene");

  m.def("generate_scene",
        [](const std::string& kind, int steps, double noise, uint64_t seed, double speed,
           int groups, double radius) {
          synth::ScenarioSpec spec;
          spec.kind = synth::scenario_kind_from_string(kind);
          spec.steps = steps;
          spec.noise = noise;
          spec.seed = seed;
          spec.speed = speed;
          spec.mixed_groups = groups;
          spec.radius = radius;
          return synth::generate(spec).scene;
        },
        py::arg("kind") = "mixed", py::arg("steps") = 40, py::arg("noise") = 0.0,
        py::arg("seed") = 1, py::arg("speed") = 1.2, py::arg("groups") = 4,
        py::arg("radius") = 2.0);

  m.def("verify_scenario_labels",
        [](const std::string& kind, int steps, uint64_t seed, double radius) {
          synth::ScenarioSpec spec;
          spec.kind = synth::scenario_kind_from_string(kind);
          spec.steps = steps;
          spec.seed = seed;
          spec.radius = radius;
          auto labeled = synth::generate(spec);
          return synth::verify_labels(labeled, radius).size();
        },
        py::arg("kind"), py::arg("steps") = 24, py::arg("seed") = 1, py::arg("radius") = 2.0,
        "Mismatch count between construction labels and extracted labels");

  m.def("region_of", [](const XY& agent, const XY& other) {
    return std::string(to_string(region_of(to_pos(agent), to_pos(other))));
  });

  m.def("walking_states",
        [](const Scene& scene, PedId agent, int first_step, int count, double radius) {
          std::vector<std::pair<XY, std::vector<std::pair<int, double>>>> out;
          for (const WalkingState& ws :
               extract_walking_states(scene, agent, first_step, count, radius)) {
            std::vector<std::pair<int, double>> slots;
            for (const RegionSlot& slot : ws.interaction.slots)
              slots.push_back({static_cast<int>(slot.state), slot.distance});
            out.push_back({to_xy(ws.position), slots});
          }
          return out;
        },
        py::arg("scene"), py::arg("agent"), py::arg("first_step"), py::arg("count"),
        py::arg("radius") = 2.0);

  m.def("window_scene",
        [](const Scene& scene, double radius, const std::string& scene_id, bool single_region) {
          return window_scene(scene, radius,
                              single_region ? RegionMode::SingleNearest
                                            : RegionMode::FourQuadrants,
                              scene_id);
        },
        py::arg("scene"), py::arg("radius") = 2.0, py::arg("scene_id") = "",
        py::arg("single_region") = false);

  m.def("rotate_window", &rotate_window, py::arg("window"), py::arg("quarter_turns"));
  m.def("scale_window", &scale_window, py::arg("window"), py::arg("factor"));
  m.def("distance_feature", &distance_feature, py::arg("d"));
  m.def("fit_stats", &fit_stats, py::arg("windows"));
  m.def("apply_stats", &apply_stats, py::arg("window"), py::arg("stats"));
  m.def("normalize_windows",
        [](const std::vector<SampleWindow>& windows) {
          FeatureStats stats = fit_stats(windows);
          std::vector<SampleWindow> out;
          for (const SampleWindow& w : windows) out.push_back(apply_stats(w, stats));
          return std::make_pair(out, stats);
        },
        py::arg("windows"), "Fit min-max stats and normalize in one call");

  m.def("ade", [](const std::vector<XY>& pred, const std::vector<XY>& truth) {
    std::vector<Position> p, t;
    for (const XY& v : pred) p.push_back(to_pos(v));
    for (const XY& v : truth) t.push_back(to_pos(v));
    return ade(p, t);
  });
  m.def("fde", [](const XY& pred, const XY& truth) { return fde(to_pos(pred), to_pos(truth)); });
  m.def("ide", [](const XY& pred, const XY& truth) { return ide(to_pos(pred), to_pos(truth)); });
  m.def("best_of_k",
        [](const std::vector<std::vector<XY>>& trajectories, const std::vector<XY>& truth) {
          PredictionSet pset;
          for (const auto& traj : trajectories) {
            pset.trajectories.push_back(to_traj(traj));
            pset.goals.push_back(pset.trajectories.back()[kFutureSteps - 1]);
          }
          BestOfK best = best_of_k(pset, to_traj(truth));
          py::dict out;
          out["best_index"] = best.best_index;
          out["ade"] = best.ade;
          out["fde"] = best.fde;
          out["ide"] = best.ide;
          out["fde_min"] = best.fde_min;
          out["ide_min"] = best.ide_min;
          return out;
        });

  py::class_<Models>(m, "Models")
      .def("decode", &Models::decode, py::arg("window"), py::arg("goal"))
      .def("sample", &Models::sample, py::arg("window"), py::arg("k") = 20,
           py::arg("seed") = 1)
      .def("evaluate", &Models::evaluate, py::arg("windows"), py::arg("k") = 20,
           py::arg("seed") = 1, py::arg("goal_mode") = "sampled", py::arg("oracle") = false,
           py::arg("jobs") = 1)
      .def("save", &Models::save, py::arg("path"))
      .def_property_readonly("loss_curve", [](const Models& m) {
        std::vector<std::tuple<int, std::string, std::string, double>> out;
        for (const LossCurvePoint& p : m.curve)
          out.push_back({p.epoch, p.component, p.term, p.value});
        return out;
      });

  m.def("train",
        [](const std::vector<SampleWindow>& windows, const FeatureStats& stats, int epochs,
           int batch_size, double lr_generator, double lr_cvae, double lambda1, double lambda2,
           double beta_kl, double clip, uint64_t seed, bool use_region_partition,
           bool use_interaction_state, bool use_ssos, int model_dim, int heads, int enc_layers,
           int dec_layers, int ffn_dim, int neighbor_hidden, int cvae_hidden, int cvae_latent) {
          return train_models(windows, stats, epochs, batch_size, lr_generator, lr_cvae,
                              lambda1, lambda2, beta_kl, clip, seed, use_region_partition,
                              use_interaction_state, use_ssos,
                              config_from_kwargs(model_dim, heads, enc_layers, dec_layers,
                                                 ffn_dim, neighbor_hidden, cvae_hidden,
                                                 cvae_latent));
        },
        py::arg("windows"), py::arg("stats"), py::arg("epochs") = 50,
        py::arg("batch_size") = 32, py::arg("lr_generator") = 1e-4, py::arg("lr_cvae") = 1e-3,
        py::arg("lambda1") = 1.0, py::arg("lambda2") = 1.0, py::arg("beta_kl") = 5.0,
        py::arg("clip") = 1.0, py::arg("seed") = 1, py::arg("use_region_partition") = true,
        py::arg("use_interaction_state") = true, py::arg("use_ssos") = true,
        py::arg("model_dim") = 128, py::arg("heads") = 4, py::arg("enc_layers") = 2,
        py::arg("dec_layers") = 2, py::arg("ffn_dim") = 256, py::arg("neighbor_hidden") = 128,
        py::arg("cvae_hidden") = 256, py::arg("cvae_latent") = 256);

  m.def("load", &load_models, py::arg("path"));

  m.attr("OBS_STEPS") = kObsSteps;
  m.attr("FUTURE_STEPS") = kFutureSteps;
  m.attr("LARGE_DISTANCE") = kLargeDistance;
}
