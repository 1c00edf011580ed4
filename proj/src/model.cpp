// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/model.hpp"

#include <stdexcept>
#include <string>

namespace dgdm {

void DiffusionConfig::validate() const {
  if (T < 2) {
    throw std::invalid_argument("diffusion.T must be >= 2");
  }
  if (reverse_steps < 1 || reverse_steps > T) {
    throw std::invalid_argument("diffusion.reverse_steps must lie in [1, T]");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("diffusion.eta must lie in [0, 1]");
  }
  if (!(truncation_fraction >= 0.0 && truncation_fraction < 1.0)) {
    throw std::invalid_argument("diffusion.truncation_fraction must lie in [0, 1)");
  }
}

SvsConfig make_svs(const DiffusionConfig& diffusion, std::int64_t forecast_length) {
  if (!diffusion.svs_enabled) {
    return make_uniform_svs(diffusion.T, forecast_length);
  }
  const auto S = diffusion.svs_step < 0 ? default_svs_step(diffusion.T, forecast_length) : diffusion.svs_step;
  return make_svs(diffusion.T, forecast_length, S);
}

FrameSchedule make_frame_schedule(const DiffusionConfig& diffusion, std::int64_t forecast_length) {
  diffusion.validate();
  return FrameSchedule(make_bridge_schedule(diffusion.T), make_svs(diffusion, forecast_length),
                       diffusion.svs_mode);
}

void ModelConfig::validate() {
  if (!use_db && !use_pb) {
    throw std::invalid_argument("model: at least one of use_db and use_pb must be set");
  }
  db.validate();
  pb.in_channels = db.in_channels;
  pb.cond_channels = db.hidden;
  if (use_pb) {
    pb.validate();
    if (bridge && !last_frame && db.input_length != db.forecast_length) {
      throw std::invalid_argument(
          "model: without last-frame replication the input clip is the bridge endpoint, so "
          "input_length must equal forecast_length");
    }
  }
}

Networks Networks::create(const ModelConfig& config) {
  Networks nets;
  if (config.use_db) {
    nets.db = DeterministicBranch(config.db);
  }
  if (config.use_pb) {
    nets.pb = ProbabilisticBranch(config.pb);
  }
  return nets;
}

std::vector<torch::Tensor> Networks::parameters() const {
  std::vector<torch::Tensor> out;
  if (db) {
    for (auto& p : db->parameters()) out.push_back(p);
  }
  if (pb) {
    for (auto& p : pb->parameters()) out.push_back(p);
  }
  return out;
}

void Networks::train(bool on) {
  if (db) db->train(on);
  if (pb) pb->train(on);
}

void Networks::to(torch::ScalarType dtype) {
  if (db) db->to(dtype);
  if (pb) pb->to(dtype);
}

void copy_weights(torch::nn::Module& dst, const torch::nn::Module& src) {
  torch::NoGradGuard ng;
  auto dp = dst.named_parameters();
  auto sp = src.named_parameters();
  auto db = dst.named_buffers();
  auto sb = src.named_buffers();
  if (dp.size() != sp.size() || db.size() != sb.size()) {
    throw std::invalid_argument("copy_weights: parameter trees differ in size");
  }
  auto copy = [](auto& d, const auto& s) {
    for (auto& item : d) {
      const auto* other = s.find(item.key());
      if (other == nullptr || other->sizes() != item.value().sizes()) {
        throw std::invalid_argument("copy_weights: mismatch at " + item.key());
      }
      item.value().copy_(*other);
    }
  };
  copy(dp, sp);
  copy(db, sb);
}

Networks clone_networks(const ModelConfig& config, const Networks& src) {
  auto out = Networks::create(config);
  if (out.db) {
    copy_weights(*out.db, *src.db);
  }
  if (out.pb) {
    copy_weights(*out.pb, *src.pb);
  }
  return out;
}

torch::Tensor replicate_last_frame(const torch::Tensor& x, std::int64_t forecast_length) {
  if (x.dim() != 5 || x.size(2) < 1) {
    throw std::invalid_argument("replicate_last_frame: expected [B, C, L>=1, H, W], got " + c10::str(x.sizes()));
  }
  if (forecast_length < 1) {
    throw std::invalid_argument("replicate_last_frame: forecast length must be >= 1");
  }
  auto last = x.narrow(2, x.size(2) - 1, 1);
  return last.expand({x.size(0), x.size(1), forecast_length, x.size(3), x.size(4)}).contiguous();
}

torch::Tensor bridge_endpoint(const ModelConfig& config, const torch::Tensor& x, std::optional<at::Generator> gen) {
  const auto L_hat = config.db.forecast_length;
  if (!config.bridge) {
    return torch::randn({x.size(0), x.size(1), L_hat, x.size(3), x.size(4)}, gen, x.options());
  }
  if (config.last_frame) {
    return replicate_last_frame(x, L_hat);
  }
  if (x.size(2) != L_hat) {
    throw std::invalid_argument("bridge_endpoint: input length must equal forecast length without replication");
  }
  return x;
}

DBOutput guidance(const ModelConfig& config, Networks& nets, const torch::Tensor& x) {
  if (nets.db) {
    return nets.db->forward(x);
  }
  const auto& c = config.db;
  DBOutput out;
  out.z = torch::zeros({x.size(0), c.forecast_length, c.hidden, x.size(3) / DBConfig::kDownsample,
                        x.size(4) / DBConfig::kDownsample},
                       x.options());
  return out;
}

}  // namespace dgdm
