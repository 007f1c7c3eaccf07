#pragma once

// Multi-level Priority Linked-List (MPLL) polling.
//
// A reader can hold only one transmit power at a time, so it interrogates its
// Twin pairs one by one. Pairs that jumped last round sit in the high-priority
// list L_P and are visited first; a jumping L_P member triggers a BFS over its
// grid neighbours. Quiescent L_P members drop to the end of L_N, jumping L_N
// members are promoted to the end of L_P. The S bit guarantees each pair is
// interrogated at most once per round.

#include <functional>
#include <list>
#include <map>
#include <vector>

#include "twins/env.hpp"

namespace twins::scheduler {

struct PollRecord {
  int twin = 0;         // T_i
  double p_tx = 0.0;    // P_TX,i
  bool priority = false;  // P_i
  bool accessed = false;  // S_i
};

/// P_TX,i for every twin: the grid midpoint of its critical window. Throws
/// CalibrationError naming the first twin without a window.
std::map<int, double> calibrate_powers(const env::TwinsGrid& grid);

using QueryFn = std::function<env::QueryOutcome(int twin, double p_tx, double t)>;
using NeighborFn = std::function<const std::vector<int>&(int twin)>;

struct RoundResult {
  std::vector<int> jumping;   // J, detection order
  std::vector<int> query_order;
  std::vector<env::QueryOutcome> outcomes;  // parallel to query_order
  double t_end = 0.0;
};

class MpllScheduler {
 public:
  /// `twins` become L_N in the given order (callers pass ascending ids).
  MpllScheduler(std::vector<int> twins, const std::map<int, double>& powers, NeighborFn neighbors);

  /// One polling round starting at t_begin; every twin is queried exactly once
  /// and each query takes tau seconds.
  RoundResult poll_round(const QueryFn& query, double t_begin, double tau);

  const std::list<int>& high() const { return high_; }
  const std::list<int>& normal() const { return normal_; }
  const PollRecord& record(int twin) const;
  std::size_t size() const { return records_.size(); }

 private:
  struct Entry {
    PollRecord rec;
    std::list<int>::iterator pos;
  };

  void move_to_high(int twin);
  void move_to_normal(int twin);
  bool member(int twin) const { return index_.count(twin) != 0; }
  Entry& entry(int twin) { return records_[index_.at(twin)]; }

  std::vector<Entry> records_;
  std::map<int, std::size_t> index_;
  std::list<int> high_;    // L_P
  std::list<int> normal_;  // L_N
  NeighborFn neighbors_;
};

/// One MPLL instance per reader, each confined to the reader's own twins.
class MpllPoller : public env::Poller {
 public:
  /// `readers` restricts polling to a subset (empty: every reader).
  MpllPoller(const env::TwinsGrid& grid, const std::map<int, double>& powers,
             const std::vector<int>& readers = {});

  /// Rounds run back to back from the interval start; as many whole rounds as
  /// fit in dt, at least one. A round longer than dt marks the interval as
  /// spilled and delays the reader's next interval.
  env::IntervalRecord poll_interval(int index, double t_begin, double dt, env::Environment& env,
                                    std::vector<env::QueryRecord>* trace) override;

  const MpllScheduler& scheduler(int reader) const { return schedulers_.at(static_cast<std::size_t>(reader)); }
  int rounds_per_interval(int reader, double dt, double tau) const;

 private:
  std::vector<MpllScheduler> schedulers_;
  std::vector<std::vector<int>> reader_twins_;
  std::vector<std::vector<std::vector<int>>> local_neighbors_;
  std::vector<double> reader_clock_;
};

struct PollingInterval {
  int index = 0;
  std::vector<int> jump_set;
  bool spill = false;
};

/// Drives the poller for ceil(duration / dt) intervals and returns one J per
/// interval. The environment supplies outcomes and time.
std::vector<PollingInterval> run_polling(MpllPoller& poller, env::Environment& env,
                                         double duration, double dt,
                                         std::vector<env::QueryRecord>* trace = nullptr);

/// Query budget check: twins per reader times tau against dt. Returns the
/// readers that cannot finish a round inside one interval.
std::vector<int> over_budget_readers(const env::TwinsGrid& grid, double dt, double tau);

}  // namespace twins::scheduler
