// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/experiment.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

namespace dgdm {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Field {
  std::string key;
  std::string type;  // JSON Schema type
  std::string items;  // element type for arrays
  std::string description;
  std::vector<std::string> choices;
  std::function<ordered_json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& want, const json& v) {
  throw ConfigError("config key '" + key + "': expected " + want + ", got " + v.dump());
}

template <class T>
T convert(const std::string& key, const json& v);

template <>
bool convert<bool>(const std::string& key, const json& v) {
  if (!v.is_boolean()) bad_value(key, "a boolean", v);
  return v.get<bool>();
}
template <>
std::int64_t convert<std::int64_t>(const std::string& key, const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<std::int64_t>(d))) return static_cast<std::int64_t>(d);
  }
  bad_value(key, "an integer", v);
}
template <>
std::uint64_t convert<std::uint64_t>(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  bad_value(key, "a non-negative integer", v);
}
template <>
double convert<double>(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number", v);
  return v.get<double>();
}
template <>
std::string convert<std::string>(const std::string& key, const json& v) {
  if (!v.is_string()) bad_value(key, "a string", v);
  return v.get<std::string>();
}
template <>
std::vector<std::int64_t> convert<std::vector<std::int64_t>>(const std::string& key, const json& v) {
  if (!v.is_array()) bad_value(key, "an array of integers", v);
  std::vector<std::int64_t> out;
  for (const auto& e : v) out.push_back(convert<std::int64_t>(key, e));
  return out;
}
template <>
std::vector<std::string> convert<std::vector<std::string>>(const std::string& key, const json& v) {
  if (!v.is_array()) bad_value(key, "an array of strings", v);
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(convert<std::string>(key, e));
  return out;
}

template <class T>
std::pair<std::string, std::string> type_of() {
  if constexpr (std::is_same_v<T, bool>) return {"boolean", ""};
  else if constexpr (std::is_integral_v<T>) return {"integer", ""};
  else if constexpr (std::is_floating_point_v<T>) return {"number", ""};
  else if constexpr (std::is_same_v<T, std::string>) return {"string", ""};
  else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) return {"array", "integer"};
  else return {"array", "string"};
}

template <class Ref>
Field field(std::string key, std::string description, Ref ref, std::vector<std::string> choices = {}) {
  using T = std::remove_reference_t<decltype(ref(std::declval<ExperimentConfig&>()))>;
  Field f;
  f.key = std::move(key);
  std::tie(f.type, f.items) = type_of<T>();
  f.description = std::move(description);
  f.choices = std::move(choices);
  f.get = [ref](const ExperimentConfig& c) { return ordered_json(ref(const_cast<ExperimentConfig&>(c))); };
  f.set = [ref, k = f.key](ExperimentConfig& c, const json& v) { ref(c) = convert<T>(k, v); };
  return f;
}

std::string svs_mode_name(SvsMode m) { return m == SvsMode::Cap ? "cap" : "rescale"; }

const std::vector<Field>& registry() {
  using C = ExperimentConfig;
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(field("description", "Free-form label copied into reports.", [](C& c) -> auto& { return c.description; }));
    f.push_back(field("seed", "Seed for dataset generation and training.", [](C& c) -> auto& { return c.seed; }));

    f.push_back(field("dataset.kind", "Dataset source.", [](C& c) -> auto& { return c.dataset.kind; },
                      {"moving_mnist", "synthetic_weather", "synthetic_pnw", "directory"}));
    f.push_back(field("dataset.dir", "Dataset directory (manifest.json plus arrays).",
                      [](C& c) -> auto& { return c.dataset.dir; }));
    f.push_back(field("dataset.variables", "Variables to load; empty loads all.",
                      [](C& c) -> auto& { return c.dataset.variables; }));
    f.push_back(field("dataset.input_length", "Observed frames L.", [](C& c) -> auto& { return c.dataset.input_length; }));
    f.push_back(field("dataset.forecast_length", "Forecast frames L_hat.",
                      [](C& c) -> auto& { return c.dataset.forecast_length; }));
    f.push_back(field("dataset.n_clips", "Generated clips.", [](C& c) -> auto& { return c.dataset.n_clips; }));
    f.push_back(field("dataset.n_digits", "Digits per Moving MNIST clip.", [](C& c) -> auto& { return c.dataset.n_digits; }));
    f.push_back(field("dataset.height", "Frame height.", [](C& c) -> auto& { return c.dataset.height; }));
    f.push_back(field("dataset.width", "Frame width.", [](C& c) -> auto& { return c.dataset.width; }));
    f.push_back(field("dataset.digit_size", "Glyph size in pixels.", [](C& c) -> auto& { return c.dataset.digit_size; }));
    f.push_back(field("dataset.speed", "Digit speed in pixels per frame.", [](C& c) -> auto& { return c.dataset.speed; }));
    f.push_back(field("dataset.digit_source", "MNIST idx3-ubyte archive; empty uses built-in glyphs.",
                      [](C& c) -> auto& { return c.dataset.digit_source; }));
    f.push_back(field("dataset.channels", "Channels of the synthetic PNW clips.",
                      [](C& c) -> auto& { return c.dataset.channels; }));
    f.push_back(field("dataset.train_fraction", "Share of clips in the train split.",
                      [](C& c) -> auto& { return c.dataset.train_fraction; }));
    f.push_back(field("dataset.val_fraction", "Share of clips in the validation split.",
                      [](C& c) -> auto& { return c.dataset.val_fraction; }));
    f.push_back(field("dataset.weather_variables", "Variables written by the synthetic weather generator.",
                      [](C& c) -> auto& { return c.dataset.weather_variables; }));
    f.push_back(field("dataset.start", "First timestamp of the synthetic weather series.",
                      [](C& c) -> auto& { return c.dataset.start; }));
    f.push_back(field("dataset.n_steps", "Time steps of the synthetic weather series.",
                      [](C& c) -> auto& { return c.dataset.n_steps; }));
    f.push_back(field("dataset.step_hours", "Hours between weather time steps.",
                      [](C& c) -> auto& { return c.dataset.step_hours; }));
    f.push_back(field("dataset.train_years", "[first, last] train years.", [](C& c) -> auto& { return c.dataset.train_years; }));
    f.push_back(field("dataset.val_years", "[first, last] validation years.", [](C& c) -> auto& { return c.dataset.val_years; }));
    f.push_back(field("dataset.test_years", "[first, last] test years.", [](C& c) -> auto& { return c.dataset.test_years; }));

    f.push_back(field("model.use_db", "Enable the deterministic branch.", [](C& c) -> auto& { return c.model.use_db; }));
    f.push_back(field("model.use_pb", "Enable the probabilistic branch.", [](C& c) -> auto& { return c.model.use_pb; }));
    f.push_back(field("model.bridge", "Diffuse towards an observed endpoint; off uses Gaussian noise.",
                      [](C& c) -> auto& { return c.model.bridge; }));
    f.push_back(field("model.last_frame", "Endpoint is the last observed frame replicated; off uses the clip itself.",
                      [](C& c) -> auto& { return c.model.last_frame; }));
    f.push_back(field("model.db.hidden", "Deterministic branch width.", [](C& c) -> auto& { return c.model.db.hidden; }));
    f.push_back(field("model.db.translator_depth", "Translator blocks.",
                      [](C& c) -> auto& { return c.model.db.translator_depth; }));
    f.push_back(field("model.db.translator_kernel", "Translator depthwise kernel size.",
                      [](C& c) -> auto& { return c.model.db.translator_kernel; }));
    f.push_back(field("model.db.translator_expansion", "Translator channel expansion.",
                      [](C& c) -> auto& { return c.model.db.translator_expansion; }));
    f.push_back(field("model.pb.base", "Denoiser base width.", [](C& c) -> auto& { return c.model.pb.base; }));
    f.push_back(field("model.pb.mults", "Width multiplier per UNet level.", [](C& c) -> auto& { return c.model.pb.mults; }));
    f.push_back(field("model.pb.time_dim", "Step embedding width.", [](C& c) -> auto& { return c.model.pb.time_dim; }));
    f.push_back(field("model.pb.heads", "Attention heads.", [](C& c) -> auto& { return c.model.pb.heads; }));
    f.push_back(field("model.pb.groups", "GroupNorm groups.", [](C& c) -> auto& { return c.model.pb.groups; }));
    f.push_back(field("model.pb.max_frames", "Longest clip covered by the temporal position bias.",
                      [](C& c) -> auto& { return c.model.pb.max_frames; }));
    f.push_back(field("model.pb.spatial_attention", "Cross-attention to the deterministic latent.",
                      [](C& c) -> auto& { return c.model.pb.spatial_attention; }));
    f.push_back(field("model.pb.temporal_attention", "Attention across frames.",
                      [](C& c) -> auto& { return c.model.pb.temporal_attention; }));

    f.push_back(field("diffusion.T", "Diffusion steps T.", [](C& c) -> auto& { return c.diffusion.T; }));
    f.push_back(field("diffusion.reverse_steps", "Reverse steps for the longest frame.",
                      [](C& c) -> auto& { return c.diffusion.reverse_steps; }));
    f.push_back(field("diffusion.eta", "Reverse-step stochasticity (0 deterministic, 1 fully resampled).",
                      [](C& c) -> auto& { return c.diffusion.eta; }));
    f.push_back(field("diffusion.truncation_fraction", "Share of each reverse grid skipped by starting from the deterministic forecast.",
                      [](C& c) -> auto& { return c.diffusion.truncation_fraction; }));
    f.push_back(field("svs.enabled", "Sequential variance schedule across lead times.",
                      [](C& c) -> auto& { return c.diffusion.svs_enabled; }));
    f.push_back(field("svs.step", "Horizon increment between lead times; negative selects floor(T / (2 L_hat)).",
                      [](C& c) -> auto& { return c.diffusion.svs_step; }));
    {
      Field m;
      m.key = "svs.mode";
      m.type = "string";
      m.description = "How shortened horizons read the schedule.";
      m.choices = {"cap", "rescale"};
      m.get = [](const C& c) { return ordered_json(svs_mode_name(c.diffusion.svs_mode)); };
      m.set = [](C& c, const json& v) {
        const auto s = convert<std::string>("svs.mode", v);
        if (s == "cap") c.diffusion.svs_mode = SvsMode::Cap;
        else if (s == "rescale") c.diffusion.svs_mode = SvsMode::Rescale;
        else throw ConfigError("config key 'svs.mode': expected \"cap\" or \"rescale\", got " + v.dump());
      };
      f.push_back(std::move(m));
    }

    f.push_back(field("train.batch_size", "Mini-batch size.", [](C& c) -> auto& { return c.train.batch_size; }));
    f.push_back(field("train.lr_db", "Deterministic branch learning rate.", [](C& c) -> auto& { return c.train.lr_db; }));
    f.push_back(field("train.lr_pb", "Probabilistic branch learning rate.", [](C& c) -> auto& { return c.train.lr_pb; }));
    f.push_back(field("train.beta1", "Adam beta1.", [](C& c) -> auto& { return c.train.beta1; }));
    f.push_back(field("train.beta2", "Adam beta2.", [](C& c) -> auto& { return c.train.beta2; }));
    f.push_back(field("train.weight_decay", "Adam weight decay.", [](C& c) -> auto& { return c.train.weight_decay; }));
    f.push_back(field("train.ema_decay", "EMA decay.", [](C& c) -> auto& { return c.train.ema_decay; }));
    f.push_back(field("train.ema_start", "Step after which EMA updates begin.", [](C& c) -> auto& { return c.train.ema_start; }));
    f.push_back(field("train.ema_every", "Steps between EMA updates.", [](C& c) -> auto& { return c.train.ema_every; }));
    f.push_back(field("train.plateau_factor", "Learning-rate reduction factor.",
                      [](C& c) -> auto& { return c.train.plateau_factor; }));
    f.push_back(field("train.plateau_patience", "Plateau patience in steps.",
                      [](C& c) -> auto& { return c.train.plateau_patience; }));
    f.push_back(field("train.plateau_cooldown", "Plateau cooldown in steps.",
                      [](C& c) -> auto& { return c.train.plateau_cooldown; }));
    f.push_back(field("train.plateau_threshold", "Relative improvement that resets patience.",
                      [](C& c) -> auto& { return c.train.plateau_threshold; }));
    f.push_back(field("train.min_lr", "Learning-rate floor.", [](C& c) -> auto& { return c.train.min_lr; }));
    f.push_back(field("train.eval_every", "Steps between validation rounds.", [](C& c) -> auto& { return c.train.eval_every; }));
    f.push_back(field("train.val_batches", "Validation batches per round.", [](C& c) -> auto& { return c.train.val_batches; }));
    f.push_back(field("train.epochs", "Epochs over the train split.", [](C& c) -> auto& { return c.train.epochs; }));
    f.push_back(field("train.max_steps", "When positive, total steps (overrides epochs).",
                      [](C& c) -> auto& { return c.train.max_steps; }));
    f.push_back(field("train.checkpoint_every", "Steps between checkpoints.",
                      [](C& c) -> auto& { return c.train.checkpoint_every; }));
    f.push_back(field("train.grad_clip", "Max gradient norm; 0 disables clipping.",
                      [](C& c) -> auto& { return c.train.grad_clip; }));

    f.push_back(field("inference.n_samples", "Ensemble members per clip.", [](C& c) -> auto& { return c.inference.n_samples; }));
    f.push_back(field("inference.seeds", "Sampling seeds; each gives one ensemble.",
                      [](C& c) -> auto& { return c.inference.seeds; }));
    f.push_back(field("inference.use_ema", "Sample with the EMA weights.", [](C& c) -> auto& { return c.inference.use_ema; }));
    f.push_back(field("inference.batched", "Draw all members as one network batch.",
                      [](C& c) -> auto& { return c.inference.batched; }));
    f.push_back(field("inference.split", "Split forecast by the run command.", [](C& c) -> auto& { return c.inference.split; },
                      {"train", "val", "test"}));
    f.push_back(field("inference.max_clips", "Clips taken from the split; 0 takes all.",
                      [](C& c) -> auto& { return c.inference.max_clips; }));

    f.push_back(field("eval.frame_sum", "MAE/MSE aggregates sum over frames.", [](C& c) -> auto& { return c.eval.frame_sum; }));
    f.push_back(field("eval.best", "Include oracle best-of-N rows.", [](C& c) -> auto& { return c.eval.best; }));
    f.push_back(field("eval.plots", "Write PNG forecast grids.", [](C& c) -> auto& { return c.eval.plots; }));
    f.push_back(field("eval.plot_clips", "Clips rendered per forecast set.", [](C& c) -> auto& { return c.eval.plot_clips; }));

    f.push_back(field("output.dir", "Run directory for checkpoints, logs, forecasts and reports.",
                      [](C& c) -> auto& { return c.output_dir; }));
    return f;
  }();
  return fields;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : registry())
    if (f.key == key) return &f;
  return nullptr;
}

void flatten(const json& doc, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    // A nested object is a section unless the key itself names a field.
    if (it->is_object() && !find_field(key)) flatten(*it, key, out);
    else out.emplace_back(key, *it);
  }
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

ModelConfig ExperimentConfig::model_config(std::int64_t channels) const {
  ModelConfig m = model;
  m.db.in_channels = channels > 0 ? channels
                     : dataset.kind == "synthetic_pnw" ? dataset.channels
                     : dataset.kind == "synthetic_weather"
                         ? static_cast<std::int64_t>(dataset.variables.empty() ? dataset.weather_variables.size()
                                                                               : dataset.variables.size())
                         : 1;
  if (channels <= 0 && dataset.kind == "directory" && !dataset.variables.empty())
    m.db.in_channels = static_cast<std::int64_t>(dataset.variables.size());
  m.db.input_length = dataset.input_length;
  m.db.forecast_length = dataset.forecast_length;
  m.validate();
  return m;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

SamplerOptions ExperimentConfig::sampler_options(std::uint64_t s) const {
  SamplerOptions o;
  o.reverse_steps = diffusion.reverse_steps;
  o.eta = diffusion.eta;
  o.truncation_fraction = diffusion.truncation_fraction;
  o.n_samples = inference.n_samples;
  o.seed = s;
  o.batched = inference.batched;
  return o;
}

MovingMnistOptions ExperimentConfig::moving_mnist_options() const {
  MovingMnistOptions o;
  o.n_clips = dataset.n_clips;
  o.n_digits = dataset.n_digits;
  o.height = dataset.height;
  o.width = dataset.width;
  o.input_length = dataset.input_length;
  o.forecast_length = dataset.forecast_length;
  o.digit_size = dataset.digit_size;
  o.speed = dataset.speed;
  o.digit_source = dataset.digit_source;
  o.train_fraction = dataset.train_fraction;
  o.val_fraction = dataset.val_fraction;
  o.seed = seed;
  return o;
}

SyntheticWeatherOptions ExperimentConfig::weather_options() const {
  SyntheticWeatherOptions o;
  o.variables = dataset.weather_variables;
  o.height = dataset.height;
  o.width = dataset.width;
  o.start = dataset.start;
  o.n_steps = dataset.n_steps;
  o.step_hours = dataset.step_hours;
  auto years = [](const std::vector<std::int64_t>& v) {
    return YearRange{static_cast<int>(v[0]), static_cast<int>(v[1])};
  };
  o.train = years(dataset.train_years);
  o.val = years(dataset.val_years);
  o.test = years(dataset.test_years);
  o.seed = seed;
  return o;
}

SyntheticPnwOptions ExperimentConfig::pnw_options() const {
  SyntheticPnwOptions o;
  o.n_clips = dataset.n_clips;
  o.channels = dataset.channels;
  o.height = dataset.height;
  o.width = dataset.width;
  o.input_length = dataset.input_length;
  o.forecast_length = dataset.forecast_length;
  o.train_fraction = dataset.train_fraction;
  o.val_fraction = dataset.val_fraction;
  o.seed = seed;
  return o;
}

void ExperimentConfig::validate() const {
  for (const auto& f : registry()) {
    if (f.choices.empty()) continue;
    const auto v = f.get(*this);
    if (v.is_string()) {
      bool ok = false;
      for (const auto& c : f.choices) ok |= v.get<std::string>() == c;
      require(ok, f.key, "unsupported value " + v.dump());
    }
  }
  require(dataset.input_length >= 1, "dataset.input_length", "must be >= 1");
  require(dataset.forecast_length >= 1, "dataset.forecast_length", "must be >= 1");
  require(!dataset.dir.empty(), "dataset.dir", "must not be empty");
  require(dataset.n_clips >= 1, "dataset.n_clips", "must be >= 1");
  require(dataset.height >= 1 && dataset.width >= 1, "dataset.height", "frame size must be positive");
  require(dataset.channels >= 1, "dataset.channels", "must be >= 1");
  require(dataset.train_fraction > 0 && dataset.val_fraction >= 0 &&
              dataset.train_fraction + dataset.val_fraction <= 1,
          "dataset.train_fraction", "fractions must be positive and sum to at most 1");
  for (const char* k : {"dataset.train_years", "dataset.val_years", "dataset.test_years"}) {
    const auto v = find_field(k)->get(*this);
    require(v.size() == 2 && v[0].get<std::int64_t>() <= v[1].get<std::int64_t>(), k, "expected [first, last]");
  }
  require(!dataset.weather_variables.empty(), "dataset.weather_variables", "must not be empty");
  require(inference.n_samples >= 0, "inference.n_samples", "must be >= 0");
  require(!inference.seeds.empty(), "inference.seeds", "must not be empty");
  for (auto s : inference.seeds) require(s >= 0, "inference.seeds", "seeds must be non-negative");
  require(inference.max_clips >= 0, "inference.max_clips", "must be >= 0");
  require(eval.plot_clips >= 0, "eval.plot_clips", "must be >= 0");
  require(!output_dir.empty(), "output.dir", "must not be empty");

  auto wrap = [](const std::string& section, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError("config section '" + section + "': " + e.what());
    }
  };
  wrap("model", [&] {
    auto m = model_config();
    if (m.use_pb) m.pb.validate_frame(dataset.height, dataset.width);
    if (m.use_pb && dataset.forecast_length > m.pb.max_frames)
      throw std::invalid_argument("dataset.forecast_length exceeds model.pb.max_frames");
  });
  wrap("diffusion", [&] { diffusion.validate(); });
  wrap("train", [&] { train_config().validate(); });
  wrap("inference", [&] {
    auto o = sampler_options(0);
    o.n_samples = std::max<std::int64_t>(o.n_samples, 1);
    o.validate();
  });
}

ordered_json config_schema() {
  const ExperimentConfig defaults;
  ordered_json props = ordered_json::object();
  for (const auto& f : registry()) {
    ordered_json p;
    p["type"] = f.type;
    if (!f.items.empty()) p["items"] = {{"type", f.items}};
    if (!f.choices.empty()) p["enum"] = f.choices;
    p["default"] = f.get(defaults);
    p["description"] = f.description;
    props[f.key] = p;
  }
  ordered_json schema;
  schema["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  schema["$id"] = "dgdm.config/1";
  schema["title"] = "DGDM experiment config";
  schema["description"] =
      "Flat dotted keys. Config files may also nest them as objects ({\"model\": {\"db\": {\"hidden\": 8}}}).";
  schema["type"] = "object";
  schema["properties"] = props;
  schema["additionalProperties"] = false;
  return schema;
}

ordered_json to_flat_json(const ExperimentConfig& config) {
  ordered_json out = ordered_json::object();
  for (const auto& f : registry()) out[f.key] = f.get(config);
  return out;
}

void apply_json(ExperimentConfig& config, const json& doc, const std::string& source) {
  if (!doc.is_object()) throw ConfigError(source + ": config must be a JSON object");
  std::vector<std::pair<std::string, json>> entries;
  flatten(doc, "", entries);
  for (const auto& [key, value] : entries) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown config key '" + key + "' in " + source);
    f->set(config, value);
  }
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "' in --set");
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded() || (f->type == "string" && !value.is_string())) value = text;
  f->set(config, value);
}

ExperimentConfig load_config(const std::vector<std::string>& files, const std::vector<std::string>& overrides) {
  ExperimentConfig config;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path + ": not valid JSON");
    apply_json(config, doc, path);
  }
  for (const auto& o : overrides) apply_override(config, o);
  config.validate();
  return config;
}

bool affects_training(const std::string& key) {
  if (key == "diffusion.eta" || key == "diffusion.reverse_steps" || key == "diffusion.truncation_fraction")
    return false;
  for (const char* p : {"seed", "dataset.", "model.", "diffusion.", "svs."})
    if (key.rfind(p, 0) == 0) return true;
  for (const char* k : {"train.batch_size", "train.lr_db", "train.lr_pb", "train.beta1", "train.beta2",
                        "train.weight_decay", "train.ema_decay", "train.ema_start", "train.ema_every",
                        "train.grad_clip", "train.eval_every", "train.val_batches", "train.plateau_factor",
                        "train.plateau_patience", "train.plateau_cooldown", "train.plateau_threshold", "train.min_lr"})
    if (key == k) return true;
  return false;
}

}  // namespace dgdm
