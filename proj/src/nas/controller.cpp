#include "nasrl/nas/controller.hpp"

#include <cmath>
#include <numeric>

#include "nasrl/autodiff/categorical.hpp"
#include "nasrl/autodiff/ops.hpp"
#include "nasrl/errors.hpp"

namespace nasrl::nas {

using ad::Tensor;
using nlohmann::json;

void ControllerConfig::validate() const {
  if (hidden == 0) throw ConfigError("controller: hidden width must be positive");
  if (!(learning_rate >= 0)) throw ConfigError("controller: learning_rate must be non-negative");
  if (entropy_coef < 0) throw ConfigError("controller: entropy_coef must be non-negative");
  if (baseline_momentum < 0 || baseline_momentum > 1)
    throw ConfigError("controller: baseline_momentum must lie in [0, 1]");
  if (total_updates == 0) throw ConfigError("controller: total_updates must be positive");
}

json to_json(const ControllerConfig& c) {
  return json{{"kind", c.kind == ControllerKind::recurrent ? "recurrent" : "independent"},
              {"hidden", c.hidden},
              {"learning_rate", c.learning_rate},
              {"entropy_coef", c.entropy_coef},
              {"baseline_momentum", c.baseline_momentum}};
}

ControllerConfig controller_config_from_json(const json& j) {
  ControllerConfig c;
  if (!j.is_object()) throw ConfigError("controller config must be an object");
  for (const auto& [key, _] : j.items())
    if (!to_json(c).contains(key)) throw ConfigError("controller config: unknown key '" + key + "'");
  try {
    const std::string kind = j.value("kind", std::string("recurrent"));
    if (kind == "recurrent")
      c.kind = ControllerKind::recurrent;
    else if (kind == "independent")
      c.kind = ControllerKind::independent;
    else
      throw ConfigError("controller: unknown kind '" + kind + "'");
    c.hidden = j.value("hidden", c.hidden);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
    c.baseline_momentum = j.value("baseline_momentum", c.baseline_momentum);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("controller config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Tensor uniform_param(ad::Shape shape, Rng& rng, double scale) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

Controller::Controller(const supernet::SearchSpace& space, ControllerConfig config,
                       std::uint64_t seed)
    : space_(space),
      config_((config.validate(), config)),
      optimizer_(ad::CosineSchedule{config.learning_rate, config.total_updates}) {
  if (space_.blocks.empty()) throw ConfigError("controller: search space has no choice blocks");
  Rng rng(derive_seed(seed, 0xc0));
  const std::size_t h = config_.hidden;
  if (config_.kind == ControllerKind::recurrent) {
    start_ = uniform_param({h}, rng, 0.1);
    embeddings_.emplace_back();  // slot 0 reads start_
    for (std::size_t s = 1; s < space_.blocks.size(); ++s)
      embeddings_.push_back(uniform_param({space_.blocks[s - 1].option_count(), h}, rng, 0.1));
    w_input_ = uniform_param({4 * h, h}, rng, 0.1);
    w_hidden_ = uniform_param({4 * h, h}, rng, 0.1);
    b_gates_ = Tensor::zeros({4 * h}, true);
    for (const auto& b : space_.blocks) {
      proj_w_.push_back(Tensor::zeros({b.option_count(), h}, true));
      proj_b_.push_back(Tensor::zeros({b.option_count()}, true));
    }
  } else {
    for (const auto& b : space_.blocks) free_logits_.push_back(Tensor::zeros({b.option_count()}, true));
  }
}

std::vector<Tensor> Controller::parameters() const {
  std::vector<Tensor> p;
  if (config_.kind == ControllerKind::independent) return free_logits_;
  p.push_back(start_);
  for (std::size_t s = 1; s < embeddings_.size(); ++s) p.push_back(embeddings_[s]);
  p.insert(p.end(), {w_input_, w_hidden_, b_gates_});
  p.insert(p.end(), proj_w_.begin(), proj_w_.end());
  p.insert(p.end(), proj_b_.begin(), proj_b_.end());
  return p;
}

Tensor Controller::slot_logits(std::size_t slot, std::optional<std::size_t> previous,
                               State& state) const {
  if (config_.kind == ControllerKind::independent) return free_logits_[slot];
  const std::size_t h = config_.hidden;
  const Tensor x = previous ? ad::row(embeddings_[slot], *previous) : start_;
  const Tensor gates =
      ad::add(ad::linear(x, w_input_, b_gates_), ad::linear(state.h, w_hidden_, Tensor()));
  const Tensor in = ad::sigmoid(ad::slice(gates, 0, h));
  const Tensor forget = ad::sigmoid(ad::slice(gates, h, h));
  const Tensor cand = ad::tanh(ad::slice(gates, 2 * h, h));
  const Tensor out = ad::sigmoid(ad::slice(gates, 3 * h, h));
  state.c = ad::add(ad::mul(forget, state.c), ad::mul(in, cand));
  state.h = ad::mul(out, ad::tanh(state.c));
  return ad::linear(state.h, proj_w_[slot], proj_b_[slot]);
}

Controller::Sample Controller::walk(const supernet::Architecture* fixed, Rng* rng) const {
  State state{Tensor::zeros({config_.hidden}), Tensor::zeros({config_.hidden})};
  Sample s;
  s.log_prob = Tensor::scalar(0.0);
  s.entropy = Tensor::scalar(0.0);
  std::optional<std::size_t> previous;
  for (std::size_t slot = 0; slot < space_.blocks.size(); ++slot) {
    const ad::Categorical dist(slot_logits(slot, previous, state));
    const std::size_t choice = fixed ? fixed->choices[slot] : dist.sample_one(*rng);
    s.architecture.choices.push_back(choice);
    s.log_prob = ad::add(s.log_prob, dist.log_prob(choice));
    s.entropy = ad::add(s.entropy, dist.entropy());
    previous = choice;
  }
  return s;
}

Controller::Sample Controller::sample(Rng& rng) const { return walk(nullptr, &rng); }

Controller::Sample Controller::evaluate(const supernet::Architecture& arch) const {
  supernet::validate_architecture(space_, arch);
  return walk(&arch, nullptr);
}

double Controller::probability(const supernet::Architecture& arch) const {
  ad::NoGradGuard no_grad;
  return std::exp(evaluate(arch).log_prob.item());
}

Tensor Controller::reinforce_loss(const std::vector<supernet::Architecture>& archs,
                                  const std::vector<double>& rewards, double baseline) const {
  if (archs.size() != rewards.size() || archs.empty())
    throw DimensionError("reinforce_loss: need one reward per architecture");
  const double n = double(archs.size());
  Tensor policy = Tensor::scalar(0.0);
  Tensor entropy = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const Sample s = evaluate(archs[i]);
    policy = ad::add(policy, ad::scale(s.log_prob, -(rewards[i] - baseline) / n));
    entropy = ad::add(entropy, ad::scale(s.entropy, 1.0 / n));
  }
  return ad::sub(policy, ad::scale(entropy, config_.entropy_coef));
}

void Controller::update(const std::vector<supernet::Architecture>& archs,
                        const std::vector<double>& rewards) {
  for (double r : rewards)
    if (!std::isfinite(r)) throw NumericError("controller update: non-finite reward");
  const double mean_reward =
      std::accumulate(rewards.begin(), rewards.end(), 0.0) / double(rewards.size());
  if (!baseline_) baseline_ = mean_reward;
  auto params = parameters();
  ad::zero_grads(params);
  ad::backward(reinforce_loss(archs, rewards, *baseline_));
  optimizer_.step(params);
  ad::zero_grads(params);
  const double m = config_.baseline_momentum;
  baseline_ = (1.0 - m) * *baseline_ + m * mean_reward;
}

void Controller::bias_slot(std::size_t slot, std::size_t option, double amount) {
  Tensor t = config_.kind == ControllerKind::recurrent ? proj_b_.at(slot) : free_logits_.at(slot);
  t.mutable_data()[option] += amount;
}

std::vector<double> architecture_probabilities(const Controller& ctrl) {
  std::vector<double> p;
  for (const auto& a : supernet::enumerate(ctrl.space())) p.push_back(ctrl.probability(a));
  return p;
}

}  // namespace nasrl::nas
