#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "relloc/kinematics.hpp"
#include "relloc/random.hpp"

namespace relloc::ranging {

/// Unordered robot pair, ids 1..N. `a` is the node transmitting when the pair is ranged.
struct Pair {
  int a{1};
  int b{2};

  int lo() const { return a < b ? a : b; }
  int hi() const { return a < b ? b : a; }
  bool contains(int id) const { return id == a || id == b; }
  bool operator==(const Pair& o) const { return lo() == o.lo() && hi() == o.hi(); }
};

/// One full token loop. Transmitter k ranges its higher-id peers from N down to k + 1;
/// the last peer it ranges (k + 1) takes over the transmit role. The loop then restarts
/// at node 1. Throws std::invalid_argument for N < 2.
std::vector<Pair> build_schedule(int n);

enum class Mode { Transmit, Receive };

struct NodeSchedule {
  int node_id{1};
  Mode mode{Mode::Receive};
  std::size_t loop_position{0};
};

/// One ranging slot on the shared channel, [t_start, t_end).
struct Slot {
  Pair pair;
  std::size_t loop_position{0};
  std::uint64_t cycle{0};
  double t_start{0.0};
  double t_end{0.0};
};

/// Walks the token loop slot by slot on a single channel.
class Scheduler {
 public:
  Scheduler(int n, double slot_time, double t0 = 0.0);

  int robots() const { return n_; }
  double slot_time() const { return slot_time_; }
  const std::vector<Pair>& loop() const { return loop_; }

  /// The slot that will be emitted next.
  const Slot& peek() const { return next_; }
  Slot advance();

  /// Mode of each node during the upcoming slot; exactly one transmits.
  std::vector<NodeSchedule> modes() const;

 private:
  int n_;
  double slot_time_;
  std::vector<Pair> loop_;
  std::uint64_t emitted_{0};
  double t0_;
  Slot next_;
  void fill_next();
};

/// Per-pair ranging rate under the full loop: 1 / (N(N-1)/2 * slot_time).
double pair_frequency(int n, double slot_time);

/// Slot time that makes pair_frequency(n_anchor, slot) == rate_hz.
double calibrate_slot_time(int n_anchor = 6, double rate_hz = 20.0);

/// Slot time matching 20 Hz per pair at six robots (1/300 s).
inline const double kDefaultSlotTime = calibrate_slot_time();

struct ChannelModel {
  double sigma_d = 0.025;
  bool bias_enabled = true;
  double bias_slope = 0.072;
  double bias_offset = 0.62;
  double outlier_prob = 0.02;
  double outlier_min = 0.5;
  double outlier_max = 3.0;
  double drop_prob = 0.0;

  /// Throws std::invalid_argument when a probability is outside [0, 1] or sigma_d <= 0.
  void validate() const;
  double bias(double d_true) const { return bias_enabled ? bias_slope * d_true + bias_offset : 0.0; }
};

/// What each node piggybacks on the exchange: its current velocity, yaw rate and height.
struct Payload {
  HorizontalVelocity v;
  double r{0.0};
  double h{0.0};
};

struct RangingEvent {
  Pair pair;
  double t{0.0};
  double d_true{0.0};
  double d_raw{0.0};
  Payload payload_a;  ///< sender of the slot (pair.a)
  Payload payload_b;
  bool outlier{false};
};

struct ExchangeResult {
  RangingEvent event;
  bool dropped{false};
};

/// Synthesizes one two-way ranging exchange. The reply leg carries the distance back,
/// so both endpoints observe the same d_raw. The event is stamped at the slot end.
ExchangeResult simulate_exchange(const Slot& slot, const ChannelModel& channel, double d_true,
                                 const Payload& payload_a, const Payload& payload_b, Rng& rng);

/// Median of the values; mean of the two central values for even sizes.
/// Throws std::invalid_argument when empty.
double median(std::span<const double> window);

/// Fixed-capacity ring buffer feeding median().
class MedianFilter {
 public:
  explicit MedianFilter(std::size_t window = 5);
  double push(double d);
  double value() const;
  std::size_t size() const { return buf_.size(); }

 private:
  std::size_t window_;
  std::deque<double> buf_;
};

/// d - (slope d + offset), clamped at zero. The bias model was fitted against true
/// distance but is applied to the measured one, leaving a residual of about slope^2 d.
double bias_correct(double d_filtered, double slope = 0.072, double offset = 0.62);

/// Median filter plus bias removal, one instance per pair.
class RangeProcessor {
 public:
  RangeProcessor(std::size_t window, bool correct_bias, double slope = 0.072, double offset = 0.62);

  struct Output {
    double filtered;
    double corrected;
  };
  Output process(double d_raw);

 private:
  MedianFilter median_;
  bool correct_bias_;
  double slope_;
  double offset_;
};

/// CSV trace of ranging events, one row per exchange (dropped ones included).
class TraceWriter {
 public:
  static constexpr const char* kSchema = "# relloc ranging-trace v1";
  struct NoHeader {};
  /// Writes the schema comment and column header.
  explicit TraceWriter(std::ostream& os);
  /// Appends rows to a stream that already carries the header.
  TraceWriter(std::ostream& os, NoHeader) : os_(os) {}
  void write(const ExchangeResult& ex, double d_filtered, double d_corrected);

 private:
  std::ostream& os_;
};

}  // namespace relloc::ranging
