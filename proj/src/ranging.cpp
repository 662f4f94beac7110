#include "relloc/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <stdexcept>

namespace relloc::ranging {

std::vector<Pair> build_schedule(int n) {
  if (n < 2) throw std::invalid_argument("build_schedule: need at least 2 robots");
  std::vector<Pair> loop;
  loop.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int tx = 1; tx < n; ++tx) {
    for (int peer = n; peer > tx; --peer) loop.push_back({tx, peer});
  }
  return loop;
}

Scheduler::Scheduler(int n, double slot_time, double t0)
    : n_(n), slot_time_(slot_time), loop_(build_schedule(n)), t0_(t0) {
  if (!(slot_time > 0.0)) throw std::invalid_argument("Scheduler: slot_time must be > 0");
  fill_next();
}

void Scheduler::fill_next() {
  const std::size_t m = loop_.size();
  next_.pair = loop_[emitted_ % m];
  next_.loop_position = emitted_ % m;
  next_.cycle = emitted_ / m;
  next_.t_start = t0_ + static_cast<double>(emitted_) * slot_time_;
  next_.t_end = t0_ + static_cast<double>(emitted_ + 1) * slot_time_;
}

Slot Scheduler::advance() {
  Slot s = next_;
  ++emitted_;
  fill_next();
  return s;
}

std::vector<NodeSchedule> Scheduler::modes() const {
  std::vector<NodeSchedule> out;
  out.reserve(n_);
  for (int id = 1; id <= n_; ++id) {
    out.push_back({id, id == next_.pair.a ? Mode::Transmit : Mode::Receive, next_.loop_position});
  }
  return out;
}

double pair_frequency(int n, double slot_time) {
  if (n < 2) throw std::invalid_argument("pair_frequency: need at least 2 robots");
  if (!(slot_time > 0.0)) throw std::invalid_argument("pair_frequency: slot_time must be > 0");
  const double pairs = 0.5 * n * (n - 1);
  return 1.0 / (pairs * slot_time);
}

double calibrate_slot_time(int n_anchor, double rate_hz) {
  if (n_anchor < 2 || !(rate_hz > 0.0)) throw std::invalid_argument("calibrate_slot_time: bad anchor");
  const double pairs = 0.5 * n_anchor * (n_anchor - 1);
  return 1.0 / (pairs * rate_hz);
}

void ChannelModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(sigma_d > 0.0)) throw std::invalid_argument("channel: sigma_d must be > 0");
  if (!prob(outlier_prob) || !prob(drop_prob)) throw std::invalid_argument("channel: probabilities must be in [0, 1]");
  if (!(outlier_min <= outlier_max)) throw std::invalid_argument("channel: outlier_min > outlier_max");
}

ExchangeResult simulate_exchange(const Slot& slot, const ChannelModel& channel, double d_true,
                                 const Payload& payload_a, const Payload& payload_b, Rng& rng) {
  ExchangeResult ex;
  ex.event.pair = slot.pair;
  ex.event.t = slot.t_end;
  ex.event.d_true = d_true;
  ex.event.payload_a = payload_a;
  ex.event.payload_b = payload_b;

  // Draw order is fixed so streams stay reproducible regardless of the outcome.
  const double noise = gaussian(rng, channel.sigma_d);
  const bool outlier = uniform(rng, 0.0, 1.0) < channel.outlier_prob;
  const double spike = uniform(rng, channel.outlier_min, channel.outlier_max);
  const bool dropped = uniform(rng, 0.0, 1.0) < channel.drop_prob;

  ex.event.outlier = outlier;
  ex.event.d_raw = d_true + channel.bias(d_true) + noise + (outlier ? spike : 0.0);
  ex.dropped = dropped;
  return ex;
}

double median(std::span<const double> window) {
  if (window.empty()) throw std::invalid_argument("median: empty window");
  std::vector<double> v(window.begin(), window.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

MedianFilter::MedianFilter(std::size_t window) : window_(window) {
  if (window == 0) throw std::invalid_argument("MedianFilter: window must be >= 1");
}

double MedianFilter::push(double d) {
  buf_.push_back(d);
  if (buf_.size() > window_) buf_.pop_front();
  return value();
}

double MedianFilter::value() const {
  std::vector<double> v(buf_.begin(), buf_.end());
  return median(v);
}

double bias_correct(double d_filtered, double slope, double offset) {
  return std::max(0.0, d_filtered - (slope * d_filtered + offset));
}

RangeProcessor::RangeProcessor(std::size_t window, bool correct_bias, double slope, double offset)
    : median_(window), correct_bias_(correct_bias), slope_(slope), offset_(offset) {}

RangeProcessor::Output RangeProcessor::process(double d_raw) {
  const double f = median_.push(d_raw);
  return {f, correct_bias_ ? bias_correct(f, slope_, offset_) : f};
}

TraceWriter::TraceWriter(std::ostream& os) : os_(os) {
  os_ << kSchema << '\n' << "t,i,j,d_true,d_raw,d_filtered,d_corrected,outlier,dropped\n";
}

void TraceWriter::write(const ExchangeResult& ex, double d_filtered, double d_corrected) {
  const auto& e = ex.event;
  os_ << std::setprecision(10) << e.t << ',' << e.pair.a << ',' << e.pair.b << ',' << e.d_true << ','
      << e.d_raw << ',';
  if (ex.dropped) {
    os_ << ",,";
  } else {
    os_ << d_filtered << ',' << d_corrected << ',';
  }
  os_ << (e.outlier ? 1 : 0) << ',' << (ex.dropped ? 1 : 0) << '\n';
}

}  // namespace relloc::ranging
