#include "cpn/playout.hpp"

#include <algorithm>

namespace cpn::playout {

BufferConfig BufferConfig::resequencer() {
  BufferConfig c;
  c.capacity = std::nullopt;
  c.hold_timeout = SimTime::infinite();
  return c;
}

std::string_view to_string(InsertAction action) {
  switch (action) {
    case InsertAction::Buffered: return "buffered";
    case InsertAction::DiscardLate: return "discard_late";
    case InsertAction::DiscardOverflow: return "discard_overflow";
    case InsertAction::Duplicate: return "duplicate";
  }
  return "?";
}

JitterBuffer::JitterBuffer(BufferConfig config)
    : config_(config), next_play_(config.first_seq) {}

void JitterBuffer::track_occupancy(SimTime now) {
  if (!first_event_) {
    first_event_ = now;
    last_event_ = now;
    return;
  }
  if (now > last_event_) {
    occupancy_integral_ns_ +=
        static_cast<double>(held_.size()) * static_cast<double>((now - last_event_).ns());
    last_event_ = now;
  }
}

void JitterBuffer::mark_seen(std::uint64_t seq) {
  if (seq >= seen_.size()) seen_.resize(std::max<std::size_t>(seq + 1, seen_.size() * 2), false);
  seen_[seq] = true;
}

InsertResult JitterBuffer::insert(const BufferedPacket& packet, SimTime now) {
  track_occupancy(now);
  InsertResult result;
  if (seen(packet.seq)) {
    ++counters_.duplicates;
    result.action = InsertAction::Duplicate;
    return result;
  }
  mark_seen(packet.seq);
  ++counters_.inserted;

  const bool abandoned = abandon_below_ && packet.seq < *abandon_below_;
  if (packet.seq < next_play_ || abandoned) {
    ++counters_.discards_late;
    result.action = InsertAction::DiscardLate;
    return result;
  }

  if (config_.capacity && held_.size() >= *config_.capacity) {
    if (config_.overflow == OverflowPolicy::DropArriving || *config_.capacity == 0 ||
        packet.seq < held_.begin()->first) {
      ++counters_.discards_overflow;
      result.action = InsertAction::DiscardOverflow;
      return result;
    }
    auto head = held_.begin();
    result.evicted = head->second.packet;
    next_play_ = std::max(next_play_, head->first + 1);
    held_.erase(head);
    ++counters_.discards_overflow;
  }

  held_.emplace(packet.seq, Held{packet, packet.arrived_at + config_.hold_timeout});
  counters_.max_queue = std::max(counters_.max_queue, held_.size());
  result.action = InsertAction::Buffered;
  return result;
}

PlayedPacket JitterBuffer::play(std::map<std::uint64_t, Held>::iterator it, SimTime now) {
  const auto& p = it->second.packet;
  PlayedPacket out{p.seq, p.sent_at, p.arrived_at, std::max(now, p.sent_at + config_.playout_offset)};
  next_play_ = p.seq + 1;
  held_.erase(it);
  ++counters_.played;
  playout_delay_sum_s_ += (out.played_at - out.sent_at).seconds();
  return out;
}

std::vector<PlayedPacket> JitterBuffer::release(SimTime now) {
  track_occupancy(now);
  for (const auto& [seq, held] : held_)
    if (held.gap_deadline <= now && (!abandon_below_ || seq > *abandon_below_)) abandon_below_ = seq;

  std::vector<PlayedPacket> out;
  while (!held_.empty()) {
    auto head = held_.begin();
    if (head->first > next_play_) {
      if (!abandon_below_ || head->first > *abandon_below_) break;
      next_play_ = head->first;
    }
    if (head->second.packet.sent_at + config_.playout_offset > now) break;
    out.push_back(play(head, now));
  }
  return out;
}

std::optional<SimTime> JitterBuffer::next_deadline() const {
  if (held_.empty()) return std::nullopt;
  std::optional<SimTime> best;
  auto consider = [&](SimTime t) {
    if (!t.is_infinite() && (!best || t < *best)) best = t;
  };
  const auto& head = *held_.begin();
  if (head.first == next_play_ || (abandon_below_ && head.first <= *abandon_below_))
    consider(head.second.packet.sent_at + config_.playout_offset);
  for (const auto& [seq, held] : held_)
    if (!abandon_below_ || seq > *abandon_below_) consider(held.gap_deadline);
  return best;
}

std::vector<PlayedPacket> JitterBuffer::drain(SimTime now) {
  track_occupancy(now);
  std::vector<PlayedPacket> out;
  while (!held_.empty()) out.push_back(play(held_.begin(), now));
  return out;
}

PlayoutReport JitterBuffer::report() const {
  PlayoutReport r = counters_;
  if (first_event_ && last_event_ > *first_event_)
    r.mean_queue = occupancy_integral_ns_ / static_cast<double>((last_event_ - *first_event_).ns());
  if (r.played > 0) r.mean_playout_delay_s = playout_delay_sum_s_ / static_cast<double>(r.played);
  return r;
}

}  // namespace cpn::playout
