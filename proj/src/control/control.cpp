#include "h2r/control.hpp"

#include <cmath>
#include <string>

#include "h2r/error.hpp"

namespace h2r {

void SmoothingConfig::validate() const {
  if (!(alpha_pos > 0.0 && alpha_pos <= 1.0) || !(alpha_rot > 0.0 && alpha_rot <= 1.0)) {
    throw Error(ErrorCode::BadConfig, "smoothing alphas must lie in (0, 1]");
  }
  if (!(deadband >= 0.0) || !std::isfinite(deadband)) {
    throw Error(ErrorCode::BadConfig, "deadband must be >= 0");
  }
}

Pose smooth(const Pose& prev_out, const Pose& new_in, const SmoothingConfig& cfg) {
  Pose out = prev_out;
  const Vec3 gap = new_in.position - prev_out.position;
  if (norm(gap) > cfg.deadband) {
    out.position = cfg.alpha_pos == 1.0 ? new_in.position : prev_out.position + cfg.alpha_pos * gap;
  }
  out.rotation = cfg.alpha_rot == 1.0
                     ? new_in.rotation
                     : interpolate_geodesic(prev_out.rotation, new_in.rotation, cfg.alpha_rot);
  return out;
}

void SchedulerConfig::validate() const {
  // Small slack so millisecond inputs like 300 survive the ms -> s conversion.
  if (!(latency_budget >= kMinLatencyBudget - 1e-12 && latency_budget <= kMaxLatencyBudget + 1e-12)) {
    throw Error(ErrorCode::BadConfig, "latency budget must be within 100-300 ms, got " +
                                          std::to_string(latency_budget * 1e3) + " ms");
  }
}

std::int64_t SchedulerConfig::budget_ns() const {
  return static_cast<std::int64_t>(std::llround(latency_budget * 1e9));
}

SerialScheduler::SerialScheduler(SchedulerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SerialScheduler::set_config(const SchedulerConfig& cfg) {
  cfg.validate();
  cfg_ = cfg;
}

std::uint64_t SerialScheduler::submit(const RobotCommand& command, std::int64_t now_ns) {
  if (stopped_) throw Error(ErrorCode::SchedulerStopped, "scheduler is stopped");
  CommandTicket ticket{next_id_++, command, now_ns, std::nullopt, std::nullopt};
  ++stats_.submitted;
  const std::uint64_t id = ticket.id;
  if (!in_flight_) {
    dispatch(std::move(ticket), now_ns);
  } else {
    if (pending_) {
      ++stats_.drops;
      events_.push_back({SchedulerEventKind::Dropped, pending_->id, now_ns, pending_->submitted_at});
    }
    pending_ = std::move(ticket);
  }
  return id;
}

std::optional<CommandTicket> SerialScheduler::complete(std::uint64_t ticket_id, std::int64_t now_ns) {
  if (!in_flight_ || in_flight_->id != ticket_id) {
    throw Error(ErrorCode::UnknownTicket, "ticket " + std::to_string(ticket_id) + " is not in flight");
  }
  in_flight_->completed_at = now_ns;
  ++stats_.completed;
  events_.push_back({SchedulerEventKind::Completed, ticket_id, now_ns, in_flight_->submitted_at});
  in_flight_.reset();

  if (!pending_) return std::nullopt;
  CommandTicket next = std::move(*pending_);
  pending_.reset();
  if (now_ns - next.submitted_at > cfg_.budget_ns()) {
    ++stats_.stale;
    events_.push_back({SchedulerEventKind::Stale, next.id, now_ns, next.submitted_at});
    return std::nullopt;
  }
  dispatch(std::move(next), now_ns);
  return in_flight_;
}

void SerialScheduler::dispatch(CommandTicket ticket, std::int64_t now_ns) {
  ticket.dispatched_at = now_ns;
  ++stats_.dispatched;
  stats_.last_queue_delay_ns = ticket.queue_delay_ns();
  stats_.max_queue_delay_ns = std::max(stats_.max_queue_delay_ns, stats_.last_queue_delay_ns);
  events_.push_back({SchedulerEventKind::Dispatched, ticket.id, now_ns, ticket.submitted_at});
  in_flight_ = std::move(ticket);
}

std::vector<SchedulerEvent> SerialScheduler::take_events() {
  std::vector<SchedulerEvent> out;
  out.swap(events_);
  return out;
}

}  // namespace h2r
