#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>

#include "cpn/time.hpp"
#include "cpn/types.hpp"

namespace cpn::goals {

class NegativeInterval : public Error {
 public:
  using Error::Error;
};

/// Forward delay from a node to the destination: half the interval between
/// the dumb packet's stamp at the node and the returning ACK's arrival there.
double forward_delay_estimate(double ack_arrival_s, double dp_stamp_at_node_s);

/// Instantaneous packet delay variation |D_i - D_{i-1}|.
double ipdv(double delay_s, double prev_delay_s);

/// Exponential smoothing with factor 1/2.
double smooth_jitter(double prev_smoothed_s, double ipdv_s);

/// 1 / (measured + epsilon). `measured` is the smoothed jitter for the Jitter
/// goal and the forward delay for the Delay goal.
double reward_from_goal(QosGoal goal, double measured_s, double epsilon_s);

/// Whether IPDV state is tracked per flow or pooled per (class, destination).
enum class MailboxKeying : std::uint8_t { PerFlow, PerClassDestination };

struct MailboxKey {
  QosGoal goal = QosGoal::Delay;
  NodeId destination;
  FlowKey flow;

  constexpr auto operator<=>(const MailboxKey&) const = default;
};

struct MailboxEntry {
  MailboxKey key;
  double last_delay_s = 0.0;
  double smoothed_jitter_s = 0.0;
  /// False until a second delay sample supplies the first IPDV.
  bool has_jitter = false;
  double last_reward = 0.0;
  SimTime updated_at;
  std::uint64_t samples = 0;
};

/// Per-node store of the latest goal measurements.
class Mailbox {
 public:
  explicit Mailbox(double epsilon_s = 1e-3, MailboxKeying keying = MailboxKeying::PerFlow);

  /// Folds a fresh forward-delay estimate into the entry for `key`: IPDV
  /// against the previous delay, jitter smoothing (first IPDV initialises the
  /// smoothed value), and the reward for the entry's goal. A Jitter entry
  /// without an IPDV yet gets the neutral reward reward_from_goal(goal, 0, eps).
  const MailboxEntry& deposit(const MailboxKey& key, double delay_s, SimTime now);

  std::optional<MailboxEntry> read(const MailboxKey& key) const;

  /// Latest reward deposited for (goal, destination) from any flow, or the
  /// neutral reward when nothing has been measured yet.
  double reward_for(QosGoal goal, NodeId destination) const;
  bool has_measurement(QosGoal goal, NodeId destination) const;

  double epsilon() const { return epsilon_s_; }
  MailboxKeying keying() const { return keying_; }
  std::size_t size() const { return entries_.size(); }

 private:
  MailboxKey normalise(MailboxKey key) const;

  double epsilon_s_;
  MailboxKeying keying_;
  std::map<MailboxKey, MailboxEntry> entries_;
  std::map<std::pair<QosGoal, NodeId>, double> class_reward_;
};

}  // namespace cpn::goals
