#include "mdpulab/mdpu.hpp"

#include <algorithm>

namespace mdpulab {

namespace {

bool contains(const std::vector<ActionId>& values, ActionId a) {
  return std::find(values.begin(), values.end(), a) != values.end();
}

}  // namespace

void Mdpu::validate() const {
  underlying.validate();
  const std::size_t n = underlying.num_states();
  if (aware.size() != n || hidden_useful.size() != n) {
    throw ModelError("MDPU awareness maps must cover every state");
  }
  for (ActionId a : known_actions) {
    if (a >= underlying.num_actions()) throw ModelError("known action out of range");
  }
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a : aware[s]) {
      if (!contains(known_actions, a) || !underlying.is_available(s, a)) {
        throw ModelError("aware action " + std::to_string(a) + " at state " + std::to_string(s) +
                         " is not a known available action");
      }
    }
    for (ActionId a : hidden_useful[s]) {
      if (contains(aware[s], a)) {
        throw ModelError("action " + std::to_string(a) + " is both aware and hidden at state " +
                         std::to_string(s));
      }
      if (!underlying.is_available(s, a)) throw ModelError("hidden action is not available");
    }
  }
}

Mdpu fully_aware(DiscreteMdp mdp) {
  const std::size_t n = mdp.num_states();
  std::vector<ActionId> known(mdp.num_actions());
  for (ActionId a = 0; a < known.size(); ++a) known[a] = a;
  std::vector<std::vector<ActionId>> aware(n);
  for (StateId s = 0; s < n; ++s) aware[s] = mdp.available(s);
  return {std::move(mdp), std::move(known), std::move(aware), std::vector<std::vector<ActionId>>(n),
          DiscoveryModel::constant(1.0)};
}

MdpuEnv::MdpuEnv(Mdpu mdpu, StateId start, std::size_t episode_steps)
    : mdpu_(std::move(mdpu)), start_(start), episode_steps_(episode_steps), current_(start) {
  mdpu_.validate();
  if (start_ >= mdpu_.underlying.num_states()) throw ModelError("start state out of range");
  if (episode_steps_ == 0) throw ModelError("episodes need at least one step");
  scanned_.assign(mdpu_.underlying.num_states(), 0);
}

StateId MdpuEnv::reset(Rng&) {
  current_ = start_;
  elapsed_ = 0;
  return current_;
}

StepResult MdpuEnv::step(ActionId a, Rng& rng) {
  const auto& mdp = mdpu_.underlying;
  if (mdp.is_terminal(current_)) throw ModelError("step from a terminal state");
  const auto outcomes = mdp.outcomes(current_, a);
  if (outcomes.empty()) throw ModelError("step with an unavailable action");

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  const Outcome* chosen = &outcomes.back();
  for (const auto& o : outcomes) {
    cumulative += o.probability;
    if (u < cumulative) {
      chosen = &o;
      break;
    }
  }
  current_ = chosen->next;
  ++elapsed_;
  const bool end = elapsed_ >= episode_steps_ || mdp.is_terminal(current_);
  return {current_, chosen->reward, 1.0, end, false};
}

ExploreResult MdpuEnv::explore(std::uint64_t t, const std::vector<bool>& aware_here, Rng& rng) {
  std::vector<ActionId> remaining;
  for (ActionId a : mdpu_.hidden_useful[current_]) {
    if (a >= aware_here.size() || !aware_here[a]) remaining.push_back(a);
  }
  const auto& model = mdpu_.discovery;
  ExploreResult result;
  std::uint64_t position = t;
  if (model.kind() == DiscoveryKind::BruteForceSystematic) {
    position = ++scanned_[current_];
    result.exhausted = position >= model.total();
  }
  if (!sample_discovery(model, remaining.size(), position, rng)) return result;
  if (model.kind() == DiscoveryKind::BruteForceSystematic) {
    result.discovered = *std::min_element(remaining.begin(), remaining.end());
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    result.discovered = remaining[pick(rng)];
  }
  return result;
}

bool MdpuEnv::is_available(StateId s, ActionId a) {
  return a < mdpu_.underlying.num_actions() && mdpu_.underlying.is_available(s, a);
}

}  // namespace mdpulab
