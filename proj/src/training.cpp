// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/training.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

namespace dgdm {

namespace {

constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;

std::int64_t steps_to_rounds(std::int64_t steps, std::int64_t every) { return (steps + every - 1) / every; }

void check_finite(const char* term, const torch::Tensor& value) {
  const double v = value.item<double>();
  if (!std::isfinite(v)) {
    throw NonFiniteLoss(term, v);
  }
}

torch::Tensor string_tensor(const std::string& s) {
  auto t = torch::empty({static_cast<std::int64_t>(s.size())}, torch::kUInt8);
  std::memcpy(t.data_ptr<std::uint8_t>(), s.data(), s.size());
  return t;
}

std::string tensor_string(const torch::Tensor& t) {
  auto c = t.contiguous();
  return std::string(reinterpret_cast<const char*>(c.data_ptr<std::uint8_t>()), static_cast<std::size_t>(c.numel()));
}

void save_module(torch::serialize::OutputArchive& ar, const std::string& key, const torch::nn::Module& m) {
  torch::serialize::OutputArchive sub;
  m.save(sub);
  ar.write(key, sub);
}

void load_module(torch::serialize::InputArchive& ar, const std::string& key, torch::nn::Module& m) {
  torch::serialize::InputArchive sub;
  if (!ar.try_read(key, sub)) {
    throw std::runtime_error("checkpoint has no entry '" + key + "'");
  }
  m.load(sub);
}

torch::serialize::InputArchive open_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw std::runtime_error("checkpoint not found: " + path);
  }
  torch::serialize::InputArchive ar;
  ar.load_from(path);
  torch::Tensor version;
  if (!ar.try_read("format_version", version) || version.item<std::int64_t>() != kCheckpointFormat) {
    throw std::runtime_error("unsupported checkpoint format in " + path);
  }
  return ar;
}

FrameSchedule schedule_for(const ModelConfig& model, const DiffusionConfig& diffusion) {
  return make_frame_schedule(diffusion, model.db.forecast_length);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(lr_db > 0 && lr_pb > 0 && min_lr > 0)) throw std::invalid_argument("train: learning rates must be positive");
  if (!(ema_decay > 0 && ema_decay < 1)) throw std::invalid_argument("train.ema_decay must lie in (0, 1)");
  if (ema_every < 1 || ema_start < 0) throw std::invalid_argument("train: ema_every >= 1 and ema_start >= 0");
  if (!(plateau_factor > 0 && plateau_factor < 1)) throw std::invalid_argument("train.plateau_factor must lie in (0, 1)");
  if (plateau_patience < 0 || plateau_cooldown < 0 || plateau_threshold < 0) {
    throw std::invalid_argument("train: plateau settings must be non-negative");
  }
  if (eval_every < 1 || checkpoint_every < 1) throw std::invalid_argument("train: eval_every and checkpoint_every >= 1");
  if (epochs < 1 && max_steps < 1) throw std::invalid_argument("train: need epochs or max_steps");
  if (grad_clip < 0) throw std::invalid_argument("train.grad_clip must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("train: betas in [0, 1)");
}

NonFiniteLoss::NonFiniteLoss(std::string term, double value)
    : std::runtime_error("non-finite " + term + " (" + std::to_string(value) + "); step aborted"),
      term_(std::move(term)) {}

torch::Tensor draw_train_steps(const FrameSchedule& schedule, const torch::Tensor& u) {
  auto horizons = torch::tensor(schedule.horizons(), torch::kLong).to(torch::kDouble).unsqueeze(0);
  auto t = torch::ceil(u.to(torch::kDouble).reshape({-1, 1}) * horizons);
  return t.clamp_min(1.0).to(torch::kLong);
}

Losses compute_losses(const ModelConfig& config, Networks& nets, const FrameSchedule& schedule,
                      const torch::Tensor& x, const torch::Tensor& y, at::Generator gen,
                      const DenoiseFn& denoiser) {
  auto zero = torch::zeros({}, y.options());
  Losses out{zero, zero, zero};
  auto g = guidance(config, nets, x);
  if (nets.db) {
    out.db = db_loss(g.y_hat, y);
  }
  if (config.use_pb) {
    auto xT = bridge_endpoint(config, x, gen);
    auto u = torch::rand({x.size(0)}, gen, torch::kDouble);
    auto steps = draw_train_steps(schedule, u);
    auto eps = torch::randn(y.sizes(), gen, y.options());
    auto x_t = forward_sample(y, xT, steps, schedule, eps);
    auto target = training_target(y, xT, steps, schedule, eps);
    auto eps_hat = denoiser ? denoiser(x_t, steps, g.z) : nets.pb->forward(x_t, steps, g.z);
    out.pb = torch::mse_loss(eps_hat, target);
  }
  out.total = out.db + out.pb;
  return out;
}

void ema_update(std::vector<torch::Tensor>& ema, const std::vector<torch::Tensor>& live, double decay) {
  if (ema.size() != live.size()) {
    throw std::invalid_argument("ema_update: parameter trees differ in size");
  }
  torch::NoGradGuard ng;
  for (std::size_t i = 0; i < ema.size(); ++i) {
    if (ema[i].sizes() != live[i].sizes()) {
      throw std::invalid_argument("ema_update: shape mismatch at parameter " + std::to_string(i));
    }
    ema[i].mul_(decay).add_(live[i], 1.0 - decay);
  }
}

void ema_update(torch::nn::Module& ema, const torch::nn::Module& live, double decay) {
  auto e = ema.named_parameters();
  auto l = live.named_parameters();
  if (e.size() != l.size()) {
    throw std::invalid_argument("ema_update: parameter trees differ in size");
  }
  std::vector<torch::Tensor> et, lt;
  for (auto& item : e) {
    const auto* other = l.find(item.key());
    if (other == nullptr) {
      throw std::invalid_argument("ema_update: live tree lacks " + item.key());
    }
    et.push_back(item.value());
    lt.push_back(*other);
  }
  ema_update(et, lt, decay);
}

bool plateau_observe(PlateauState& state, double metric, const PlateauOptions& options) {
  if (metric < state.best * (1.0 - options.threshold)) {
    state.best = metric;
    state.num_bad = 0;
  } else {
    ++state.num_bad;
  }
  if (state.cooldown_left > 0) {
    --state.cooldown_left;
    state.num_bad = 0;
  }
  if (state.num_bad >= options.patience) {
    state.cooldown_left = options.cooldown;
    state.num_bad = 0;
    return true;
  }
  return false;
}

double plateau_step(double current_lr, const std::vector<double>& history, PlateauState& state,
                    const PlateauOptions& options) {
  double lr = current_lr;
  for (; state.consumed < history.size(); ++state.consumed) {
    if (plateau_observe(state, history[state.consumed], options)) {
      lr = std::max(lr * options.factor, options.min_lr);
    }
  }
  return lr;
}

Trainer::Trainer(ModelConfig model, DiffusionConfig diffusion, TrainConfig train, std::string config_json)
    : model_((model.validate(), std::move(model))),
      diffusion_(std::move(diffusion)),
      train_((train.validate(), std::move(train))),
      config_json_(std::move(config_json)),
      schedule_(schedule_for(model_, diffusion_)),
      gen_(at::make_generator<at::CPUGeneratorImpl>(train_.seed)) {
  torch::manual_seed(train_.seed);
  nets_ = Networks::create(model_);
  ema_ = clone_networks(model_, nets_);
  for (auto& p : ema_.parameters()) {
    p.set_requires_grad(false);
  }

  auto adam = [&](double lr) {
    return std::make_unique<torch::optim::AdamOptions>(
        torch::optim::AdamOptions(lr).betas({train_.beta1, train_.beta2}).weight_decay(train_.weight_decay));
  };
  std::vector<torch::optim::OptimizerParamGroup> groups;
  if (nets_.db) groups.emplace_back(nets_.db->parameters(), adam(train_.lr_db));
  if (nets_.pb) groups.emplace_back(nets_.pb->parameters(), adam(train_.lr_pb));
  // Explicit defaults would override the per-group options in this libtorch.
  optimizer_ = std::make_unique<torch::optim::Adam>(std::move(groups));
}

Losses Trainer::step(const torch::Tensor& x, const torch::Tensor& y) {
  nets_.train(true);
  optimizer_->zero_grad();
  auto losses = compute_losses(model_, nets_, schedule_, x, y, gen_);
  check_finite("loss_db", losses.db);
  check_finite("loss_pb", losses.pb);
  losses.total.backward();
  if (train_.grad_clip > 0) {
    torch::nn::utils::clip_grad_norm_(nets_.parameters(), train_.grad_clip);
  }
  optimizer_->step();
  ++step_;

  if (step_ % train_.ema_every == 0) {
    auto sync = [&](torch::nn::Module& e, const torch::nn::Module& l) {
      if (step_ < train_.ema_start) {
        copy_weights(e, l);
      } else {
        ema_update(e, l, train_.ema_decay);
      }
    };
    if (nets_.db) sync(*ema_.db, *nets_.db);
    if (nets_.pb) sync(*ema_.pb, *nets_.pb);
  }
  return {losses.total.detach(), losses.db.detach(), losses.pb.detach()};
}

double Trainer::validation_loss(const std::vector<std::pair<torch::Tensor, torch::Tensor>>& batches) {
  if (batches.empty()) {
    throw std::invalid_argument("validation_loss: no batches");
  }
  torch::NoGradGuard ng;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(train_.seed ^ kValidationStream);
  double sum = 0.0;
  for (const auto& [x, y] : batches) {
    sum += compute_losses(model_, nets_, schedule_, x, y, gen).total.item<double>();
  }
  return sum / static_cast<double>(batches.size());
}

PlateauOptions Trainer::plateau_options() const {
  PlateauOptions o;
  o.factor = train_.plateau_factor;
  o.patience = steps_to_rounds(train_.plateau_patience, train_.eval_every);
  o.cooldown = steps_to_rounds(train_.plateau_cooldown, train_.eval_every);
  o.threshold = train_.plateau_threshold;
  o.min_lr = train_.min_lr;
  return o;
}

bool Trainer::on_validation(double metric) {
  val_history_.push_back(metric);
  bool reduced = false;
  for (; plateau_.consumed < val_history_.size(); ++plateau_.consumed) {
    reduced = plateau_observe(plateau_, val_history_[plateau_.consumed], plateau_options()) || reduced;
  }
  if (reduced) {
    scale_lrs(train_.plateau_factor);
  }
  return reduced;
}

void Trainer::scale_lrs(double factor) {
  for (auto& group : optimizer_->param_groups()) {
    auto& opts = static_cast<torch::optim::AdamOptions&>(group.options());
    opts.lr(std::max(opts.lr() * factor, train_.min_lr));
  }
}

double Trainer::lr_db() const {
  if (!nets_.db) return 0.0;
  return static_cast<const torch::optim::AdamOptions&>(optimizer_->param_groups().front().options()).lr();
}

double Trainer::lr_pb() const {
  if (!nets_.pb) return 0.0;
  return static_cast<const torch::optim::AdamOptions&>(optimizer_->param_groups().back().options()).lr();
}

void Trainer::save(const std::string& path) const {
  torch::serialize::OutputArchive ar;
  ar.write("format_version", torch::tensor(kCheckpointFormat));
  if (nets_.db) {
    save_module(ar, "db", *nets_.db);
    save_module(ar, "ema_db", *ema_.db);
  }
  if (nets_.pb) {
    save_module(ar, "pb", *nets_.pb);
    save_module(ar, "ema_pb", *ema_.pb);
  }
  torch::serialize::OutputArchive opt;
  optimizer_->save(opt);
  ar.write("optimizer", opt);
  ar.write("step", torch::tensor(step_));
  ar.write("config", string_tensor(config_json_));
  ar.write("rng", gen_.get_state());
  ar.write("plateau", torch::tensor({plateau_.best, static_cast<double>(plateau_.num_bad),
                                     static_cast<double>(plateau_.cooldown_left),
                                     static_cast<double>(plateau_.consumed)},
                                    torch::kDouble));
  ar.write("val_history", torch::tensor(val_history_, torch::kDouble));
  ar.write("lr", torch::tensor({lr_db(), lr_pb()}, torch::kDouble));

  const auto tmp = path + ".tmp";
  ar.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

void Trainer::load(const std::string& path) {
  auto ar = open_checkpoint(path);
  if (nets_.db) {
    load_module(ar, "db", *nets_.db);
    load_module(ar, "ema_db", *ema_.db);
  }
  if (nets_.pb) {
    load_module(ar, "pb", *nets_.pb);
    load_module(ar, "ema_pb", *ema_.pb);
  }
  torch::serialize::InputArchive opt;
  ar.read("optimizer", opt);
  optimizer_->load(opt);

  auto entry = [&](const char* key) {
    torch::Tensor t;
    ar.read(key, t);
    return t;
  };
  step_ = entry("step").item<std::int64_t>();
  gen_.set_state(entry("rng"));
  auto t = entry("plateau");
  auto p = t.accessor<double, 1>();
  plateau_.best = p[0];
  plateau_.num_bad = static_cast<std::int64_t>(p[1]);
  plateau_.cooldown_left = static_cast<std::int64_t>(p[2]);
  plateau_.consumed = static_cast<std::size_t>(p[3]);
  t = entry("val_history");
  val_history_.assign(t.data_ptr<double>(), t.data_ptr<double>() + t.numel());
  t = entry("lr");
  const auto lrs = t.accessor<double, 1>();
  auto& groups = optimizer_->param_groups();
  if (nets_.db) static_cast<torch::optim::AdamOptions&>(groups.front().options()).lr(lrs[0]);
  if (nets_.pb) static_cast<torch::optim::AdamOptions&>(groups.back().options()).lr(lrs[1]);
}

std::string read_checkpoint_config(const std::string& path) {
  auto ar = open_checkpoint(path);
  torch::Tensor t;
  ar.read("config", t);
  return tensor_string(t);
}

Networks load_networks(const std::string& path, const ModelConfig& config, bool use_ema) {
  auto ar = open_checkpoint(path);
  auto cfg = config;
  cfg.validate();
  auto nets = Networks::create(cfg);
  if (nets.db) load_module(ar, use_ema ? "ema_db" : "db", *nets.db);
  if (nets.pb) load_module(ar, use_ema ? "ema_pb" : "pb", *nets.pb);
  nets.train(false);
  for (auto& p : nets.parameters()) {
    p.set_requires_grad(false);
  }
  return nets;
}

}  // namespace dgdm
