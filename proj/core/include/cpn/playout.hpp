#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cpn/time.hpp"

namespace cpn::playout {

enum class OverflowPolicy : std::uint8_t { DropArriving, DropHead };

struct BufferConfig {
  /// nullopt means unbounded.
  std::optional<std::size_t> capacity = 20;
  /// How long a buffered packet waits for missing predecessors before the gap
  /// is abandoned. SimTime::infinite() never abandons.
  SimTime hold_timeout = SimTime::from_ns(60'000'000);
  /// Target send-to-playback delay.
  SimTime playout_offset = SimTime::from_ns(80'000'000);
  std::uint64_t first_seq = 0;
  OverflowPolicy overflow = OverflowPolicy::DropArriving;

  /// Infinite capacity and timeout: a pure resequencer.
  static BufferConfig resequencer();
};

enum class InsertAction : std::uint8_t { Buffered, DiscardLate, DiscardOverflow, Duplicate };

std::string_view to_string(InsertAction action);

struct BufferedPacket {
  std::uint64_t seq = 0;
  SimTime sent_at;
  SimTime arrived_at;
};

struct PlayedPacket {
  std::uint64_t seq = 0;
  SimTime sent_at;
  SimTime arrived_at;
  SimTime played_at;
};

struct InsertResult {
  InsertAction action = InsertAction::Buffered;
  /// Head packet pushed out under OverflowPolicy::DropHead.
  std::optional<BufferedPacket> evicted;
};

struct PlayoutReport {
  std::uint64_t inserted = 0;
  std::uint64_t played = 0;
  std::uint64_t discards_late = 0;
  std::uint64_t discards_overflow = 0;
  std::uint64_t duplicates = 0;
  std::size_t max_queue = 0;
  double mean_queue = 0.0;
  double mean_playout_delay_s = 0.0;
};

/// Receiver-side resequencing jitter buffer.
///
/// Packets leave in strictly increasing sequence order, each no earlier than
/// sent_at + playout_offset. A packet that has waited hold_timeout since its
/// arrival abandons every missing predecessor; an abandoned or already-played
/// sequence number arriving afterwards is a late discard.
class JitterBuffer {
 public:
  explicit JitterBuffer(BufferConfig config = {});

  InsertResult insert(const BufferedPacket& packet, SimTime now);

  /// Plays every packet that is due at `now`.
  std::vector<PlayedPacket> release(SimTime now);

  /// Earliest time at which release() could make progress.
  std::optional<SimTime> next_deadline() const;

  /// Plays everything still held, in order, skipping gaps.
  std::vector<PlayedPacket> drain(SimTime now);

  std::size_t size() const { return held_.size(); }
  std::uint64_t next_play_seq() const { return next_play_; }
  const BufferConfig& config() const { return config_; }
  PlayoutReport report() const;

 private:
  struct Held {
    BufferedPacket packet;
    SimTime gap_deadline;
  };

  void track_occupancy(SimTime now);
  bool seen(std::uint64_t seq) const { return seq < seen_.size() && seen_[seq]; }
  void mark_seen(std::uint64_t seq);
  PlayedPacket play(std::map<std::uint64_t, Held>::iterator it, SimTime now);

  BufferConfig config_;
  std::map<std::uint64_t, Held> held_;
  std::vector<bool> seen_;
  std::uint64_t next_play_;
  std::optional<std::uint64_t> abandon_below_;

  PlayoutReport counters_;
  std::optional<SimTime> first_event_;
  SimTime last_event_;
  double occupancy_integral_ns_ = 0.0;
  double playout_delay_sum_s_ = 0.0;
};

}  // namespace cpn::playout
