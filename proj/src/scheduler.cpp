#include "twins/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "twins/error.hpp"

namespace twins::scheduler {

std::map<int, double> calibrate_powers(const env::TwinsGrid& grid) {
  std::map<int, double> out;
  for (const auto& t : grid.twins()) {
    if (!t.window) {
      throw CalibrationError("twin " + std::to_string(t.id) + " has no critical window at D=" +
                             std::to_string(t.reader_distance) + " m");
    }
    out[t.id] = t.window->grid_midpoint();
  }
  return out;
}

MpllScheduler::MpllScheduler(std::vector<int> twins, const std::map<int, double>& powers,
                             NeighborFn neighbors)
    : neighbors_(std::move(neighbors)) {
  records_.reserve(twins.size());
  for (int t : twins) {
    auto it = powers.find(t);
    if (it == powers.end()) throw CalibrationError("no calibrated power for twin " + std::to_string(t));
    if (index_.count(t)) throw ArgumentError("duplicate twin " + std::to_string(t));
    index_[t] = records_.size();
    normal_.push_back(t);
    records_.push_back({{t, it->second, false, false}, std::prev(normal_.end())});
  }
}

const PollRecord& MpllScheduler::record(int twin) const { return records_.at(index_.at(twin)).rec; }

void MpllScheduler::move_to_high(int twin) {
  Entry& e = entry(twin);
  if (e.rec.priority) {
    high_.splice(high_.end(), high_, e.pos);
  } else {
    high_.splice(high_.end(), normal_, e.pos);
  }
  e.rec.priority = true;
}

void MpllScheduler::move_to_normal(int twin) {
  Entry& e = entry(twin);
  if (e.rec.priority) {
    normal_.splice(normal_.end(), high_, e.pos);
  } else {
    normal_.splice(normal_.end(), normal_, e.pos);
  }
  e.rec.priority = false;
}

RoundResult MpllScheduler::poll_round(const QueryFn& query, double t_begin, double tau) {
  RoundResult out;
  double t = t_begin;
  auto interrogate = [&](int twin) {
    Entry& e = entry(twin);
    e.rec.accessed = true;
    const auto outcome = query(twin, e.rec.p_tx, t);
    t += tau;
    out.query_order.push_back(twin);
    out.outcomes.push_back(outcome);
    const bool jumping = outcome == env::QueryOutcome::Jumping;
    if (jumping) out.jumping.push_back(twin);
    return jumping;
  };

  // BFS from a jumping twin over grid neighbours not yet accessed this round.
  auto expand = [&](int root) {
    std::deque<int> frontier{root};
    while (!frontier.empty()) {
      const int cur = frontier.front();
      frontier.pop_front();
      for (int nb : neighbors_(cur)) {
        if (!member(nb) || entry(nb).rec.accessed) continue;
        if (interrogate(nb)) {
          if (!entry(nb).rec.priority) move_to_high(nb);
          frontier.push_back(nb);
        }
      }
    }
  };

  const std::vector<int> high_snapshot(high_.begin(), high_.end());
  for (int twin : high_snapshot) {
    if (entry(twin).rec.accessed) {
      // Already reached by an earlier BFS; a jumping one was kept in L_P there.
      continue;
    }
    if (interrogate(twin)) {
      expand(twin);
    } else {
      move_to_normal(twin);
    }
  }

  const std::vector<int> normal_snapshot(normal_.begin(), normal_.end());
  for (int twin : normal_snapshot) {
    if (entry(twin).rec.accessed) continue;
    if (interrogate(twin)) move_to_high(twin);
  }

  // BFS-visited L_P members that turned out quiescent still drop to L_N.
  for (int twin : high_snapshot) {
    const auto& rec = entry(twin).rec;
    if (rec.priority && std::find(out.jumping.begin(), out.jumping.end(), twin) == out.jumping.end()) {
      move_to_normal(twin);
    }
  }

  for (auto& e : records_) e.rec.accessed = false;
  out.t_end = t;
  return out;
}

MpllPoller::MpllPoller(const env::TwinsGrid& grid, const std::map<int, double>& powers,
                       const std::vector<int>& active) {
  const std::size_t readers = grid.readers().size();
  reader_twins_.resize(readers);
  local_neighbors_.resize(readers);
  reader_clock_.assign(readers, 0.0);
  schedulers_.reserve(readers);
  for (std::size_t r = 0; r < readers; ++r) {
    const bool enabled =
        active.empty() || std::find(active.begin(), active.end(), static_cast<int>(r)) != active.end();
    if (enabled) reader_twins_[r] = grid.twins_of_reader(static_cast<int>(r));
    auto& local = local_neighbors_[r];
    if (enabled) local.resize(grid.size());
    for (int t : reader_twins_[r]) {
      for (int nb : grid.twin_neighbors(t)) {
        if (grid.twin(nb).reader_id == static_cast<int>(r)) local[static_cast<std::size_t>(t)].push_back(nb);
      }
    }
    const auto* table = &local_neighbors_[r];
    schedulers_.emplace_back(reader_twins_[r], powers, [table](int twin) -> const std::vector<int>& {
      return (*table)[static_cast<std::size_t>(twin)];
    });
  }
}

int MpllPoller::rounds_per_interval(int reader, double dt, double tau) const {
  const std::size_t n = schedulers_.at(static_cast<std::size_t>(reader)).size();
  if (n == 0) return 0;
  const double round = static_cast<double>(n) * tau;
  return std::max(1, static_cast<int>(std::floor(dt / round + 1e-9)));
}

env::IntervalRecord MpllPoller::poll_interval(int index, double t_begin, double dt,
                                              env::Environment& env,
                                              std::vector<env::QueryRecord>* trace) {
  env::IntervalRecord rec;
  rec.index = index;
  rec.t_begin = t_begin;
  rec.t_end = t_begin + dt;
  const double tau = env.tau_query();
  for (std::size_t r = 0; r < schedulers_.size(); ++r) {
    auto& sched = schedulers_[r];
    if (sched.size() == 0) continue;
    const int rounds = rounds_per_interval(static_cast<int>(r), dt, tau);
    double t = std::max(t_begin, reader_clock_[r]);
    for (int k = 0; k < rounds; ++k) {
      auto query = [&](int twin, double p_tx, double tq) {
        const auto outcome = env.query(twin, p_tx, tq);
        if (trace) {
          trace->push_back({tq, static_cast<int>(r), twin, p_tx, outcome, index, k});
        }
        return outcome;
      };
      const double t0 = t;
      auto result = sched.poll_round(query, t0, tau);
      t = result.t_end;
      rec.rounds.push_back({static_cast<int>(r), k, t0, t, std::move(result.jumping)});
    }
    reader_clock_[r] = t;
    if (t > rec.t_end + 1e-9) rec.spill = true;
  }
  return rec;
}

std::vector<PollingInterval> run_polling(MpllPoller& poller, env::Environment& env,
                                         double duration, double dt,
                                         std::vector<env::QueryRecord>* trace) {
  std::vector<PollingInterval> out;
  const int intervals = static_cast<int>(std::ceil(duration / dt - 1e-9));
  for (int k = 0; k < intervals; ++k) {
    const auto rec = poller.poll_interval(k, k * dt, dt, env, trace);
    env.sort_events();
    out.push_back({k, rec.jump_set(), rec.spill});
  }
  return out;
}

std::vector<int> over_budget_readers(const env::TwinsGrid& grid, double dt, double tau) {
  std::vector<int> out;
  for (const auto& r : grid.readers()) {
    const double need = static_cast<double>(grid.twins_of_reader(r.id).size()) * tau;
    if (need > dt + 1e-9) out.push_back(r.id);
  }
  return out;
}

}  // namespace twins::scheduler
