#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berry/env.hpp"
#include "berry/faults.hpp"
#include "berry/qnet.hpp"
#include "berry/rng.hpp"

namespace berry {

struct Transition {
  Observation s;
  std::size_t a = 0;
  double r = 0.0;
  Observation s_next;
  bool done = false;  // true terminal (goal or collision); timeouts bootstrap
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  /// Indices drawn uniformly with replacement over the occupied slots.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> data_;
};

/// Epsilon-greedy; the greedy branch breaks ties toward the lowest index.
std::size_t select_action(const QNetwork& net, std::span<const float> obs, double epsilon, Rng& rng);

/// y = r when done, else r + gamma * max_a' Q(s', a'; target).
std::vector<double> td_targets(const QNetwork& target, std::span<const Transition* const> batch, double gamma);

enum class TrainMode { classical, berry_offline, berry_ondevice };

const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::classical;
  double p = 0.005;  // bit error rate for the offline perturbed pass
  std::size_t episodes = 500;
  std::size_t batch = 32;
  double gamma = 0.99;
  double alpha = 1e-3;
  std::size_t target_period = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // of episodes
  std::size_t buffer_capacity = 50000;
  std::size_t learning_starts = 0;  // transitions before updates; max with batch
  std::vector<std::size_t> hidden = {64, 64};
  std::uint64_t seed = 1;
  FaultModel fault_model;
  std::optional<FaultMap> fault_map;  // required for berry_ondevice

  void validate() const;
};

double epsilon_at(const TrainConfig& cfg, std::size_t episode);

/// Independent random streams used by berry_train, all derived from the
/// config seed.
struct TrainStreams {
  std::uint64_t init;     // network initialization
  std::uint64_t action;   // epsilon-greedy draws
  std::uint64_t replay;   // minibatch indices
  std::uint64_t episode;  // base for per-episode start draws
  std::uint64_t fault;    // base for per-step offline fault maps

  static TrainStreams from_seed(std::uint64_t seed);
  std::uint64_t episode_seed(std::size_t e) const { return derive_seed(episode, {e}); }
  std::uint64_t fault_seed(std::uint64_t step, unsigned which) const { return derive_seed(fault, {step, which}); }
};

struct EpisodeLog {
  std::uint64_t step = 0;  // global step count at episode end
  std::size_t episode = 0;
  double ret = 0.0;
  TerminalKind outcome = TerminalKind::none;
  double loss_clean = 0.0;      // mean over this episode's updates
  double loss_perturbed = 0.0;  // mean over this episode's updates
  double epsilon = 0.0;
};

struct TrainLog {
  std::vector<EpisodeLog> episodes;
  std::uint64_t total_steps = 0;
  std::uint64_t updates = 0;
  std::uint64_t target_syncs = 0;

  std::string to_csv() const;
};

struct TrainResult {
  QNetwork net;
  TrainLog log;
};

/// Per-update hook for instrumentation (step index, clean and perturbed
/// gradients, the target network in use). Optional.
using UpdateObserver =
    std::function<void(std::uint64_t step, const Gradient& clean, const Gradient& perturbed, const QNetwork& target)>;

/// Deep-Q training with the optional error-aware perturbed pass:
///   clean:     y  = r + g max Q(s'; theta^-),            D  = grad sum (Q(s,a; theta) - y)^2
///   perturbed: y~ = r + g max Q(s'; BErr(theta^-)),      D~ = grad sum (Q(s,a; BErr(theta)) - y~)^2
///   update:    theta <- theta - alpha (D + D~);  theta^- <- theta every target_period steps.
/// D~ is evaluated at the corrupted parameters and applied to theta
/// (straight-through). classical skips the perturbed pass.
TrainResult berry_train(std::shared_ptr<const GridWorld> world, const TrainConfig& cfg,
                        std::optional<QNetwork> initial = std::nullopt,
                        const std::function<void(const EpisodeLog&)>& on_episode = {},
                        const UpdateObserver& on_update = {});

std::vector<std::size_t> network_arch(const GridWorld& world, std::span<const std::size_t> hidden);

}  // namespace berry
