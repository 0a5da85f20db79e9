#include "cpn/goals.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cpn::goals {

double forward_delay_estimate(double ack_arrival_s, double dp_stamp_at_node_s) {
  if (ack_arrival_s < dp_stamp_at_node_s) {
    std::ostringstream os;
    os << "ACK arrival " << ack_arrival_s << " s precedes packet stamp " << dp_stamp_at_node_s
       << " s";
    throw NegativeInterval(os.str());
  }
  return (ack_arrival_s - dp_stamp_at_node_s) / 2.0;
}

double ipdv(double delay_s, double prev_delay_s) { return std::abs(delay_s - prev_delay_s); }

double smooth_jitter(double prev_smoothed_s, double ipdv_s) {
  return prev_smoothed_s / 2.0 + ipdv_s / 2.0;
}

double reward_from_goal(QosGoal /*goal*/, double measured_s, double epsilon_s) {
  if (!(epsilon_s > 0.0)) throw std::invalid_argument("reward_from_goal: epsilon must be > 0");
  if (measured_s < 0.0) throw std::invalid_argument("reward_from_goal: negative measurement");
  return 1.0 / (measured_s + epsilon_s);
}

Mailbox::Mailbox(double epsilon_s, MailboxKeying keying) : epsilon_s_(epsilon_s), keying_(keying) {
  if (!(epsilon_s > 0.0)) throw std::invalid_argument("Mailbox: epsilon must be > 0");
}

MailboxKey Mailbox::normalise(MailboxKey key) const {
  if (keying_ == MailboxKeying::PerClassDestination) key.flow = FlowKey{};
  return key;
}

const MailboxEntry& Mailbox::deposit(const MailboxKey& raw_key, double delay_s, SimTime now) {
  if (!(delay_s >= 0.0) || !std::isfinite(delay_s))
    throw std::invalid_argument("Mailbox::deposit: delay must be finite and >= 0");
  const auto key = normalise(raw_key);
  auto [it, fresh] = entries_.try_emplace(key);
  auto& e = it->second;
  if (fresh) {
    e.key = key;
  } else {
    const double variation = ipdv(delay_s, e.last_delay_s);
    e.smoothed_jitter_s = e.has_jitter ? smooth_jitter(e.smoothed_jitter_s, variation) : variation;
    e.has_jitter = true;
  }
  e.last_delay_s = delay_s;
  e.updated_at = now;
  ++e.samples;
  switch (key.goal) {
    case QosGoal::Jitter:
      e.last_reward = reward_from_goal(key.goal, e.has_jitter ? e.smoothed_jitter_s : 0.0, epsilon_s_);
      break;
    case QosGoal::Delay:
      e.last_reward = reward_from_goal(key.goal, delay_s, epsilon_s_);
      break;
  }
  class_reward_[{key.goal, key.destination}] = e.last_reward;
  return e;
}

std::optional<MailboxEntry> Mailbox::read(const MailboxKey& key) const {
  auto it = entries_.find(normalise(key));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double Mailbox::reward_for(QosGoal goal, NodeId destination) const {
  auto it = class_reward_.find({goal, destination});
  if (it == class_reward_.end()) return reward_from_goal(goal, 0.0, epsilon_s_);
  return it->second;
}

bool Mailbox::has_measurement(QosGoal goal, NodeId destination) const {
  return class_reward_.contains({goal, destination});
}

}  // namespace cpn::goals
