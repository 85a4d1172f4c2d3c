#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "h2r/geometry.hpp"
#include "h2r/retarget.hpp"

namespace h2r {

struct SmoothingConfig {
  double alpha_pos = 0.5;
  double alpha_rot = 0.5;
  double deadband = 0.0005;  // m

  // Throws BadConfig unless alphas are in (0, 1] and deadband >= 0.
  void validate() const;
  friend bool operator==(const SmoothingConfig&, const SmoothingConfig&) = default;
};

// First-order exponential step from prev_out toward new_in. Position holds
// inside the deadband; rotation moves alpha_rot of the geodesic.
Pose smooth(const Pose& prev_out, const Pose& new_in, const SmoothingConfig& cfg);

inline constexpr double kMinLatencyBudget = 0.100;  // s
inline constexpr double kMaxLatencyBudget = 0.300;  // s

enum class StalenessPolicy { DropOldest };

struct SchedulerConfig {
  double latency_budget = 0.200;  // s, queueing delay allowed before a pending command is stale
  StalenessPolicy policy = StalenessPolicy::DropOldest;

  void validate() const;
  std::int64_t budget_ns() const;
  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct CommandTicket {
  std::uint64_t id = 0;
  RobotCommand command;
  std::int64_t submitted_at = 0;
  std::optional<std::int64_t> dispatched_at;
  std::optional<std::int64_t> completed_at;

  std::int64_t queue_delay_ns() const { return dispatched_at.value_or(submitted_at) - submitted_at; }
  friend bool operator==(const CommandTicket&, const CommandTicket&) = default;
};

enum class SchedulerEventKind { Dispatched, Completed, Dropped, Stale };

struct SchedulerEvent {
  SchedulerEventKind kind;
  std::uint64_t ticket_id;
  std::int64_t t_ns;
  std::int64_t submitted_at;
  friend bool operator==(const SchedulerEvent&, const SchedulerEvent&) = default;
};

struct SchedulerStats {
  std::uint64_t submitted = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t completed = 0;
  std::uint64_t drops = 0;
  std::uint64_t stale = 0;
  std::int64_t last_queue_delay_ns = 0;
  std::int64_t max_queue_delay_ns = 0;
  friend bool operator==(const SchedulerStats&, const SchedulerStats&) = default;
};

// Serial command scheduling: at most one command in flight and a single
// pending slot where the newest submission replaces the older one. Single
// writer; callers serialize submit/complete through one event queue.
class SerialScheduler {
 public:
  explicit SerialScheduler(SchedulerConfig cfg = {});

  // Dispatches immediately when idle; otherwise replaces the pending slot.
  // Returns the new ticket id. Throws SchedulerStopped after stop().
  std::uint64_t submit(const RobotCommand& command, std::int64_t now_ns);

  // Completes the in-flight ticket and returns the ticket dispatched in its
  // place, if any. A pending command older than the budget is dropped as stale.
  // Throws UnknownTicket if `ticket_id` is not in flight.
  std::optional<CommandTicket> complete(std::uint64_t ticket_id, std::int64_t now_ns);

  void stop() { stopped_ = true; }
  bool stopped() const { return stopped_; }
  void set_config(const SchedulerConfig& cfg);

  const SchedulerConfig& config() const { return cfg_; }
  const std::optional<CommandTicket>& in_flight() const { return in_flight_; }
  const std::optional<CommandTicket>& pending() const { return pending_; }
  const SchedulerStats& stats() const { return stats_; }

  // Events since the last call, in order.
  std::vector<SchedulerEvent> take_events();

  friend bool operator==(const SerialScheduler&, const SerialScheduler&) = default;

 private:
  void dispatch(CommandTicket ticket, std::int64_t now_ns);

  SchedulerConfig cfg_;
  bool stopped_ = false;
  std::uint64_t next_id_ = 1;
  std::optional<CommandTicket> in_flight_;
  std::optional<CommandTicket> pending_;
  SchedulerStats stats_;
  std::vector<SchedulerEvent> events_;
};

}  // namespace h2r
