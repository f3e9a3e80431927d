#include "topicflow/config.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace topicflow {

namespace {

int parse_int(const std::string& where, const std::string& raw) {
  char* end = nullptr;
  const long long v = std::strtoll(raw.c_str(), &end, 10);
  if (raw.empty() || end != raw.c_str() + raw.size()) {
    throw IoError(where + ": invalid integer '" + raw + "'");
  }
  return static_cast<int>(v);
}

unsigned long long parse_u64(const std::string& where, const std::string& raw) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
  if (raw.empty() || end != raw.c_str() + raw.size()) {
    throw IoError(where + ": invalid seed '" + raw + "'");
  }
  return v;
}

double parse_double(const std::string& where, const std::string& raw) {
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (raw.empty() || end != raw.c_str() + raw.size()) {
    throw IoError(where + ": invalid number '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& where, const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw IoError(where + ": invalid boolean '" + raw + "' (expected true|false)");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::vector<Field> make_fields() {
  std::vector<Field> f;
  auto add_int = [&](const std::string& sec, const std::string& key, auto member) {
    f.push_back({sec, key,
                 [member](RunConfig& c, const std::string& w, const std::string& v) {
                   member(c) = parse_int(w, v);
                 },
                 [member](const RunConfig& c) {
                   return std::to_string(member(const_cast<RunConfig&>(c)));
                 }});
  };
  auto add_double = [&](const std::string& sec, const std::string& key, auto member) {
    f.push_back({sec, key,
                 [member](RunConfig& c, const std::string& w, const std::string& v) {
                   member(c) = parse_double(w, v);
                 },
                 [member](const RunConfig& c) {
                   return format_double(member(const_cast<RunConfig&>(c)));
                 }});
  };
  auto add_bool = [&](const std::string& sec, const std::string& key, auto member) {
    f.push_back({sec, key,
                 [member](RunConfig& c, const std::string& w, const std::string& v) {
                   member(c) = parse_bool(w, v);
                 },
                 [member](const RunConfig& c) {
                   return member(const_cast<RunConfig&>(c)) ? "true" : "false";
                 }});
  };
  auto add_string = [&](const std::string& sec, const std::string& key, auto member) {
    f.push_back({sec, key,
                 [member](RunConfig& c, const std::string&, const std::string& v) {
                   member(c) = v;
                 },
                 [member](const RunConfig& c) {
                   return member(const_cast<RunConfig&>(c));
                 }});
  };

  f.push_back({"", "seed",
               [](RunConfig& c, const std::string& w, const std::string& v) {
                 c.seed = parse_u64(w, v);
               },
               [](const RunConfig& c) { return std::to_string(c.seed); }});

  add_string("paths", "train", [](RunConfig& c) -> std::string& { return c.paths.train; });
  add_string("paths", "valid", [](RunConfig& c) -> std::string& { return c.paths.valid; });
  add_string("paths", "test", [](RunConfig& c) -> std::string& { return c.paths.test; });
  add_string("paths", "vocab", [](RunConfig& c) -> std::string& { return c.paths.vocab; });
  add_string("paths", "bow_vocab",
             [](RunConfig& c) -> std::string& { return c.paths.bow_vocab; });
  add_string("paths", "stopwords",
             [](RunConfig& c) -> std::string& { return c.paths.stopwords; });
  add_string("paths", "checkpoint",
             [](RunConfig& c) -> std::string& { return c.paths.checkpoint; });
  add_string("paths", "ntm_checkpoint",
             [](RunConfig& c) -> std::string& { return c.paths.ntm_checkpoint; });
  add_string("paths", "out_dir",
             [](RunConfig& c) -> std::string& { return c.paths.out_dir; });

  add_int("corpus", "min_count", [](RunConfig& c) -> int& { return c.corpus.min_count; });
  add_int("corpus", "bow_max_size",
          [](RunConfig& c) -> int& { return c.corpus.bow_max_size; });
  add_int("corpus", "n_max", [](RunConfig& c) -> int& { return c.corpus.n_max; });
  add_int("corpus", "m_max", [](RunConfig& c) -> int& { return c.corpus.m_max; });

  add_int("ntm", "h_ntm", [](RunConfig& c) -> int& { return c.ntm.h_ntm; });
  add_int("ntm", "d_z", [](RunConfig& c) -> int& { return c.ntm.d_z; });
  add_int("ntm", "topics", [](RunConfig& c) -> int& { return c.ntm.t_topics; });
  add_int("ntm", "flows", [](RunConfig& c) -> int& { return c.ntm.k_flows; });

  add_int("summarizer", "layers_enc",
          [](RunConfig& c) -> int& { return c.summarizer.layers_enc; });
  add_int("summarizer", "layers_dec",
          [](RunConfig& c) -> int& { return c.summarizer.layers_dec; });
  add_int("summarizer", "d_model",
          [](RunConfig& c) -> int& { return c.summarizer.d_model; });
  add_int("summarizer", "heads", [](RunConfig& c) -> int& { return c.summarizer.heads; });
  add_int("summarizer", "ffn_dim",
          [](RunConfig& c) -> int& { return c.summarizer.ffn_dim; });
  add_int("summarizer", "max_positions",
          [](RunConfig& c) -> int& { return c.summarizer.max_positions; });
  add_double("summarizer", "dropout",
             [](RunConfig& c) -> double& { return c.summarizer.dropout; });
  add_bool("summarizer", "tied_output",
           [](RunConfig& c) -> bool& { return c.summarizer.tied_output; });

  add_double("training", "lambda_ntm",
             [](RunConfig& c) -> double& { return c.training.lambda_ntm; });
  add_double("training", "lr_ntm",
             [](RunConfig& c) -> double& { return c.training.lr_ntm; });
  add_double("training", "lr_joint",
             [](RunConfig& c) -> double& { return c.training.lr_joint; });
  add_int("training", "batch_size",
          [](RunConfig& c) -> int& { return c.training.batch_size; });
  add_int("training", "max_steps",
          [](RunConfig& c) -> int& { return c.training.max_steps; });
  add_int("training", "max_epochs",
          [](RunConfig& c) -> int& { return c.training.max_epochs; });
  add_int("training", "eval_interval",
          [](RunConfig& c) -> int& { return c.training.eval_interval; });
  add_int("training", "checkpoint_top_k",
          [](RunConfig& c) -> int& { return c.training.checkpoint_top_k; });
  add_double("training", "clip_norm",
             [](RunConfig& c) -> double& { return c.training.clip_norm; });
  add_int("training", "warmup_steps",
          [](RunConfig& c) -> int& { return c.training.warmup_steps; });
  add_string("training", "optimizer",
             [](RunConfig& c) -> std::string& { return c.training.optimizer; });
  add_bool("training", "freeze_ntm",
           [](RunConfig& c) -> bool& { return c.training.freeze_ntm; });
  add_string("training", "theta_mode",
             [](RunConfig& c) -> std::string& { return c.training.theta_mode; });
  f.push_back({"training", "gating",
               [](RunConfig& c, const std::string& w, const std::string& v) {
                 try {
                   c.training.gating = gating_mode_from_string(v);
                 } catch (const IoError& e) {
                   throw IoError(w + ": " + e.what());
                 }
               },
               [](const RunConfig& c) { return to_string(c.training.gating); }});

  add_int("eval", "beam", [](RunConfig& c) -> int& { return c.eval.beam; });
  add_double("eval", "length_penalty",
             [](RunConfig& c) -> double& { return c.eval.length_penalty; });
  add_int("eval", "decode_max_len",
          [](RunConfig& c) -> int& { return c.eval.decode_max_len; });
  add_int("eval", "coherence_window",
          [](RunConfig& c) -> int& { return c.eval.coherence_window; });
  add_int("eval", "topic_top_k",
          [](RunConfig& c) -> int& { return c.eval.topic_top_k; });
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = make_fields();
  return f;
}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

void apply_value(RunConfig& cfg, const std::string& where, const std::string& section,
                 const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (f.section == section && f.key == key) {
      f.set(cfg, where, value);
      return;
    }
  }
  throw IoError(where + ": unknown config key '" + qualified(section, key) + "'");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Drops a trailing comment, honoring double-quoted spans.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string parse_toml_value(const std::string& where, const std::string& raw) {
  if (!raw.empty() && raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') {
      throw IoError(where + ": unterminated string");
    }
    std::string out;
    for (size_t i = 1; i + 1 < raw.size(); ++i) {
      if (raw[i] == '\\' && i + 2 < raw.size()) {
        ++i;
        out += raw[i];
      } else {
        out += raw[i];
      }
    }
    return out;
  }
  if (raw.empty() || raw.find_first_of(" \t") != std::string::npos) {
    throw IoError(where + ": expected a quoted string or a bare value, got '" + raw +
                  "'");
  }
  return raw;
}

void apply_toml(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) {
        throw IoError(where + ": malformed section header '" + body + "'");
      }
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const size_t eq = body.find('=');
    if (eq == std::string::npos) {
      throw IoError(where + ": expected key = value, got '" + body + "'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = parse_toml_value(where, trim(body.substr(eq + 1)));
    if (key.empty()) throw IoError(where + ": empty key");
    apply_value(cfg, where, section, key, value);
  }
}

std::string json_scalar(const std::string& where, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean() || v.is_number()) return v.dump();
  throw IoError(where + ": expected a scalar value");
}

void apply_json(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw IoError(path + ": top level must be an object");
  for (const auto& [key, value] : doc.items()) {
    if (value.is_object()) {
      for (const auto& [inner, scalar] : value.items()) {
        const std::string where = path + ": " + qualified(key, inner);
        apply_value(cfg, where, key, inner, json_scalar(where, scalar));
      }
    } else {
      const std::string where = path + ": " + key;
      apply_value(cfg, where, "", key, json_scalar(where, value));
    }
  }
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (json) {
    apply_json(cfg, path);
  } else {
    apply_toml(cfg, path);
  }
}

void set_config_value(RunConfig& cfg, const std::string& name, const std::string& value,
                      const std::string& where) {
  const size_t dot = name.find('.');
  const std::string section = dot == std::string::npos ? "" : name.substr(0, dot);
  const std::string key = dot == std::string::npos ? name : name.substr(dot + 1);
  apply_value(cfg, where, section, key, value);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) {
    out.push_back({qualified(f.section, f.key), f.get(cfg)});
  }
  return out;
}

}  // namespace topicflow
