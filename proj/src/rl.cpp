#include "berry/rl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "berry/error.hpp"

namespace berry {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay buffer capacity must be >= 1");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw UsageError("batch size must be >= 1");
  if (data_.size() < batch) throw UsageError("replay buffer holds fewer transitions than the batch size");
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.below(data_.size()));
  return idx;
}

std::size_t select_action(const QNetwork& net, std::span<const float> obs, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw UsageError("epsilon must lie in [0, 1]");
  if (rng.uniform() < epsilon) return static_cast<std::size_t>(rng.below(net.output_size()));
  const auto q = forward(net, obs);
  return argmax_lowest(q);
}

std::vector<double> td_targets(const QNetwork& target, std::span<const Transition* const> batch, double gamma) {
  if (batch.empty()) throw UsageError("td_targets needs a non-empty batch");
  std::vector<double> y;
  y.reserve(batch.size());
  for (const auto* t : batch) {
    if (t->done) {
      y.push_back(t->r);
      continue;
    }
    const auto q = forward(target, t->s_next);
    y.push_back(t->r + gamma * *std::max_element(q.begin(), q.end()));
  }
  return y;
}

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::classical:
      return "classical";
    case TrainMode::berry_offline:
      return "berry_offline";
    case TrainMode::berry_ondevice:
      return "berry_ondevice";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "classical") return TrainMode::classical;
  if (s == "berry_offline") return TrainMode::berry_offline;
  if (s == "berry_ondevice") return TrainMode::berry_ondevice;
  throw ConfigError("unknown training mode '" + s + "' (expected classical, berry_offline or berry_ondevice)");
}

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (target_period < 1) throw ConfigError("target_period must be >= 1");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  if (buffer_capacity < batch) throw ConfigError("buffer_capacity must be >= batch");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw ConfigError("epsilon bounds must lie in [0, 1]");
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
    throw ConfigError("epsilon_decay_fraction must lie in (0, 1]");
  for (auto h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be >= 1");
  if (mode == TrainMode::berry_ondevice && !fault_map)
    throw ConfigError("berry_ondevice mode requires a fault map");
}

double epsilon_at(const TrainConfig& cfg, std::size_t episode) {
  const double horizon = cfg.epsilon_decay_fraction * static_cast<double>(cfg.episodes);
  const double frac = horizon > 0.0 ? std::min(1.0, static_cast<double>(episode) / horizon) : 1.0;
  return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
}

TrainStreams TrainStreams::from_seed(std::uint64_t seed) {
  return {seed, derive_seed(seed, {1}), derive_seed(seed, {2}), derive_seed(seed, {3}), derive_seed(seed, {4})};
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "step,episode,return,outcome,loss_clean,loss_perturbed,epsilon\n";
  for (const auto& e : episodes) {
    os << e.step << ',' << e.episode << ',' << e.ret << ',' << to_string(e.outcome) << ',' << e.loss_clean << ','
       << e.loss_perturbed << ',' << e.epsilon << '\n';
  }
  return os.str();
}

std::vector<std::size_t> network_arch(const GridWorld& world, std::span<const std::size_t> hidden) {
  std::vector<std::size_t> arch{world.observation_size()};
  arch.insert(arch.end(), hidden.begin(), hidden.end());
  arch.push_back(world.actions().size());
  return arch;
}

namespace {

std::vector<TdSample> make_samples(std::span<const Transition* const> batch, const std::vector<double>& targets) {
  std::vector<TdSample> samples;
  samples.reserve(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) samples.push_back({batch[j]->s, batch[j]->a, targets[j]});
  return samples;
}

}  // namespace

TrainResult berry_train(std::shared_ptr<const GridWorld> world, const TrainConfig& cfg, std::optional<QNetwork> initial,
                        const std::function<void(const EpisodeLog&)>& on_episode, const UpdateObserver& on_update) {
  if (!world) throw ConfigError("training needs an environment");
  cfg.validate();
  const auto arch = network_arch(*world, cfg.hidden);
  const auto streams = TrainStreams::from_seed(cfg.seed);

  QNetwork net = initial ? std::move(*initial) : init_network(arch, streams.init);
  if (net.arch() != arch) throw ConfigError("initial network does not match the environment and hidden widths");
  if (cfg.mode == TrainMode::berry_ondevice) {
    // Fail before training if the chip map cannot hold this network.
    (void)berr(net, *cfg.fault_map, cfg.fault_model);
  }
  QNetwork target = net;

  Rng action_rng(streams.action);
  Rng replay_rng(streams.replay);
  ReplayBuffer buffer(cfg.buffer_capacity);
  const std::size_t warmup = std::max(cfg.batch, cfg.learning_starts);

  TrainResult result;
  TrainLog& log = result.log;
  Episode episode(world);
  std::uint64_t step = 0;
  const Gradient zero = Gradient::zeros_like(net);
  std::vector<const Transition*> batch(cfg.batch);

  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const double eps = epsilon_at(cfg, e);
    Observation obs = episode.reset(streams.episode_seed(e));
    EpisodeLog entry;
    entry.episode = e;
    entry.epsilon = eps;
    std::size_t updates = 0;
    double sum_clean = 0.0, sum_perturbed = 0.0;

    while (!episode.done()) {
      const std::size_t a = select_action(net, obs, eps, action_rng);
      StepOutcome out = episode.step(a);
      entry.ret += out.reward;
      const bool terminal = out.terminal == TerminalKind::goal || out.terminal == TerminalKind::collision;
      buffer.push({obs, a, out.reward, out.observation, terminal});
      obs = std::move(out.observation);
      if (out.done) entry.outcome = out.terminal;

      if (buffer.size() >= warmup) {
        const auto idx = buffer.sample_indices(cfg.batch, replay_rng);
        for (std::size_t j = 0; j < cfg.batch; ++j) batch[j] = &buffer[idx[j]];

        // Clean pass.
        const auto y = td_targets(target, batch, cfg.gamma);
        const auto clean_samples = make_samples(batch, y);
        TdResult clean = td_gradient(net, clean_samples);

        // Perturbed pass.
        TdResult perturbed{0.0, {}};
        if (cfg.mode != TrainMode::classical) {
          QNetwork net_tilde, target_tilde;
          if (cfg.mode == TrainMode::berry_offline) {
            net_tilde = berr(net, cfg.p, streams.fault_seed(step, 0), cfg.fault_model);
            target_tilde = berr(target, cfg.p, streams.fault_seed(step, 1), cfg.fault_model);
          } else {
            net_tilde = berr(net, *cfg.fault_map, cfg.fault_model);
            target_tilde = berr(target, *cfg.fault_map, cfg.fault_model);
          }
          const auto y_tilde = td_targets(target_tilde, batch, cfg.gamma);
          const auto samples = make_samples(batch, y_tilde);
          perturbed = td_gradient(net_tilde, samples);
        }
        const Gradient& g_perturbed = cfg.mode == TrainMode::classical ? zero : perturbed.gradient;

        if (!std::isfinite(clean.loss) || !std::isfinite(perturbed.loss))
          throw NumericalError("training diverged: non-finite loss at step " + std::to_string(step));
        if (on_update) on_update(step, clean.gradient, g_perturbed, target);
        net = apply_update(std::move(net), clean.gradient, g_perturbed, cfg.alpha);
        sum_clean += clean.loss;
        sum_perturbed += perturbed.loss;
        ++updates;
        ++log.updates;
      }

      ++step;
      if (step % cfg.target_period == 0) {
        target = net;
        ++log.target_syncs;
      }
    }
    entry.step = step;
    if (updates) {
      entry.loss_clean = sum_clean / static_cast<double>(updates);
      entry.loss_perturbed = sum_perturbed / static_cast<double>(updates);
    }
    log.episodes.push_back(entry);
    if (on_episode) on_episode(entry);
  }
  log.total_steps = step;
  result.net = std::move(net);
  return result;
}

}  // namespace berry
