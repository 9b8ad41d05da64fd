#include "insyn/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "insyn/error.hpp"

namespace insyn {

namespace {

enum class FieldType { U64, Int, Double, Bool };

struct Field {
  const char* key;
  FieldType type;
  std::function<void*(RunConfig&)> ptr;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", FieldType::U64, [](RunConfig& c) -> void* { return &c.seed; }},
      {"radius", FieldType::Double, [](RunConfig& c) -> void* { return &c.radius; }},
      {"k", FieldType::Int, [](RunConfig& c) -> void* { return &c.k; }},
      {"jobs", FieldType::Int, [](RunConfig& c) -> void* { return &c.jobs; }},
      {"model.dim", FieldType::Int, [](RunConfig& c) -> void* { return &c.model.model_dim; }},
      {"model.heads", FieldType::Int, [](RunConfig& c) -> void* { return &c.model.heads; }},
      {"model.enc_layers", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.enc_layers; }},
      {"model.dec_layers", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.dec_layers; }},
      {"model.ffn", FieldType::Int, [](RunConfig& c) -> void* { return &c.model.ffn_dim; }},
      {"model.neighbor_hidden", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.neighbor_hidden; }},
      {"model.cvae_hidden", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_hidden; }},
      {"model.cvae_latent", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_latent; }},
      {"model.cvae_cond", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_cond_dim; }},
      {"model.cvae_expand_hidden", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_expand_hidden; }},
      {"model.cvae_expand_dim", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_expand_dim; }},
      {"model.cvae_dec_hidden", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.model.cvae_dec_hidden; }},
      {"train.lr_generator", FieldType::Double,
       [](RunConfig& c) -> void* { return &c.train.lr_generator; }},
      {"train.lr_cvae", FieldType::Double,
       [](RunConfig& c) -> void* { return &c.train.lr_cvae; }},
      {"train.epochs", FieldType::Int, [](RunConfig& c) -> void* { return &c.train.epochs; }},
      {"train.batch", FieldType::Int, [](RunConfig& c) -> void* { return &c.train.batch_size; }},
      {"train.lambda1", FieldType::Double,
       [](RunConfig& c) -> void* { return &c.train.weights.lambda_recon; }},
      {"train.lambda2", FieldType::Double,
       [](RunConfig& c) -> void* { return &c.train.weights.lambda_pred; }},
      {"train.beta_kl", FieldType::Double,
       [](RunConfig& c) -> void* { return &c.train.weights.beta_kl; }},
      {"train.clip", FieldType::Double, [](RunConfig& c) -> void* { return &c.train.clip; }},
      {"train.checkpoint_every", FieldType::Int,
       [](RunConfig& c) -> void* { return &c.train.checkpoint_every; }},
      {"ablation.use_region_partition", FieldType::Bool,
       [](RunConfig& c) -> void* { return &c.train.ablations.use_region_partition; }},
      {"ablation.use_interaction_state", FieldType::Bool,
       [](RunConfig& c) -> void* { return &c.train.ablations.use_interaction_state; }},
      {"ablation.use_ssos", FieldType::Bool,
       [](RunConfig& c) -> void* { return &c.train.ablations.use_ssos; }},
      {"augment.rot", FieldType::Bool, [](RunConfig& c) -> void* { return &c.augment_rot; }},
      {"augment.scale", FieldType::Bool,
       [](RunConfig& c) -> void* { return &c.augment_scale; }},
  };
  return table;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

void set_field(RunConfig& config, const std::string& key, const std::string& value,
               const std::string& source) {
  for (const Field& f : fields()) {
    if (key != f.key) continue;
    void* p = f.ptr(config);
    try {
      switch (f.type) {
        case FieldType::U64: {
          size_t pos = 0;
          *static_cast<uint64_t*>(p) = std::stoull(value, &pos);
          if (pos != value.size()) throw std::invalid_argument(value);
          break;
        }
        case FieldType::Int: {
          size_t pos = 0;
          *static_cast<int*>(p) = std::stoi(value, &pos);
          if (pos != value.size()) throw std::invalid_argument(value);
          break;
        }
        case FieldType::Double: {
          size_t pos = 0;
          *static_cast<double*>(p) = std::stod(value, &pos);
          if (pos != value.size()) throw std::invalid_argument(value);
          break;
        }
        case FieldType::Bool: {
          if (value == "true" || value == "1") *static_cast<bool*>(p) = true;
          else if (value == "false" || value == "0") *static_cast<bool*>(p) = false;
          else throw std::invalid_argument(value);
          break;
        }
      }
    } catch (const std::exception&) {
      fail("bad-config", source + ": bad value '" + value + "' for key '" + key + "'");
    }
    return;
  }
  fail("bad-config", source + ": unknown key '" + key + "'");
}

std::string field_value(const RunConfig& config, const Field& f) {
  void* p = f.ptr(const_cast<RunConfig&>(config));
  char buf[64];
  switch (f.type) {
    case FieldType::U64:
      std::snprintf(buf, sizeof(buf), "%llu",
                    static_cast<unsigned long long>(*static_cast<uint64_t*>(p)));
      return buf;
    case FieldType::Int:
      return std::to_string(*static_cast<int*>(p));
    case FieldType::Double:
      std::snprintf(buf, sizeof(buf), "%.9g", *static_cast<double*>(p));
      return buf;
    case FieldType::Bool:
      return *static_cast<bool*>(p) ? "true" : "false";
  }
  return "";
}

uint64_t fnv1a(const std::string& text) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void apply_config_text(RunConfig& config, std::istream& in, const std::string& source) {
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail("bad-config", source + " line " + std::to_string(lineno) + ": expected key = value");
    set_field(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
              source + " line " + std::to_string(lineno));
  }
  config.train.seed = config.seed;
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open config '" + path + "'");
  apply_config_text(config, in, path);
}

void apply_override(RunConfig& config, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    fail("bad-config", "override '" + assignment + "' must be key=value");
  set_field(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
            "override");
  config.train.seed = config.seed;
}

void validate(const RunConfig& config) {
  auto demand = [](bool ok, const std::string& what) {
    if (!ok) fail("bad-config", what);
  };
  demand(config.radius > 0.0, "radius must be > 0");
  demand(config.k >= 1, "k must be >= 1");
  demand(config.jobs >= 1, "jobs must be >= 1");
  const ModelConfig& m = config.model;
  demand(m.model_dim > 0 && m.heads > 0 && m.ffn_dim > 0 && m.neighbor_hidden > 0,
         "model dimensions must be positive");
  demand(m.enc_layers >= 0 && m.dec_layers >= 0, "layer counts must be >= 0");
  demand(m.model_dim % m.heads == 0, "heads must divide the model dimension");
  demand(m.model_dim % 2 == 0, "model dimension must be even");
  demand(m.cvae_hidden > 0 && m.cvae_latent > 0 && m.cvae_cond_dim > 0 &&
             m.cvae_expand_hidden > 0 && m.cvae_expand_dim > 0 && m.cvae_dec_hidden > 0,
         "goal-sampler dimensions must be positive");
  const TrainConfig& t = config.train;
  demand(t.lr_generator > 0.0 && t.lr_cvae > 0.0, "learning rates must be > 0");
  demand(t.epochs >= 1, "epochs must be >= 1");
  demand(t.batch_size >= 1, "batch size must be >= 1");
  demand(t.weights.lambda_recon >= 0.0 && t.weights.lambda_pred >= 0.0 &&
             t.weights.beta_kl >= 0.0,
         "loss weights must be >= 0");
  demand(t.checkpoint_every >= 0, "checkpoint interval must be >= 0");
}

std::string canonical_text(const RunConfig& config) {
  std::vector<std::string> lines;
  for (const Field& f : fields()) lines.push_back(std::string(f.key) + " = " + field_value(config, f));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a(canonical_text(config))); }

std::string model_hash(const RunConfig& config) {
  std::string text;
  for (const Field& f : fields()) {
    std::string key = f.key;
    bool relevant = key.rfind("model.", 0) == 0 || key.rfind("ablation.", 0) == 0 ||
                    key == "radius";
    if (relevant) text += key + " = " + field_value(config, f) + "\n";
  }
  return hex64(fnv1a(text));
}

void echo_config(std::ostream& out, const RunConfig& config) {
  out << canonical_text(config);
  out << "config_hash = " << config_hash(config) << "\n";
  out << "model_hash = " << model_hash(config) << "\n";
}

}  // namespace insyn
