#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amc.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "state_space.hpp"

namespace dtdq {

inline constexpr long kMinSimSlots = 10'000;
inline constexpr int kBatches = 40;

/// Point estimate with its batch-means standard error.
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct SimResult {
    long slots = 0;
    long warmup_slots = 0;
    std::uint64_t seed = 0;
    std::string rng_algorithm;
    int batches = kBatches;
    Estimate aoi_mean;
    Estimate aoi_second_moment;
    Estimate paoi_mean;
    std::vector<long> aoi_histogram;  // aoi_histogram[h] = slots with AoI h
    long cycles = 0;
    long obsolete_count = 0;
    long generations = 0;
    long min_generation_gap = 0;  // smallest gap between generations, measured window
    long peak_violations = 0;     // cycles whose peak is below an AoI seen in the cycle
};

/// What happened during one call to SlotSimulator::advance().
struct SlotEvents {
    int fresh_receptions = 0;
    int obsolete_receptions = 0;
    long peak = 0;  // AoI just before the up-to-date reception; 0 when none
    bool generated = false;
    int generated_on = 0;  // bit 0: S1 took the packet, bit 1: S2
};

/// Slot-level sample path of the two-server system.
///
/// Each slot every busy server advances its DPH phase chain by one step;
/// absorbed servers deliver their packet. Deliveries are judged newest
/// first, so of two packets arriving together only the fresher counts.
/// A generation follows the deliveries of the same slot once at least k
/// slots have passed since the previous one and a server is idle. With
/// k = 0 a packet generated onto two idle servers is sent on both.
class SlotSimulator {
public:
    SlotSimulator(const SystemConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed), last_gen_(-static_cast<long>(std::max(cfg.k, 1))) {
        if (cfg.k < 0) throw ModelError("simulate: k must be >= 0");
        try_generate(events_);
    }

    const SlotEvents& advance() {
        ++t_;
        events_ = SlotEvents{};
        std::array<bool, 2> done{false, false};
        for (int s = 0; s < 2; ++s) {
            Server& sv = servers_[static_cast<std::size_t>(s)];
            if (sv.phase < 0) continue;
            sv.phase = dist(s).step(sv.phase, rng_);
            done[static_cast<std::size_t>(s)] = sv.phase < 0;
        }
        // Newest first; a tie in generation time is obsolete.
        std::array<int, 2> order{0, 1};
        if (servers_[1].gen > servers_[0].gen) order = {1, 0};
        for (int s : order) {
            if (!done[static_cast<std::size_t>(s)]) continue;
            const long gen = servers_[static_cast<std::size_t>(s)].gen;
            if (gen > freshest_) {
                events_.peak = (t_ - 1) - freshest_;
                freshest_ = gen;
                ++events_.fresh_receptions;
            } else {
                ++events_.obsolete_receptions;
            }
        }
        try_generate(events_);
        return events_;
    }

    long time() const { return t_; }
    long aoi() const { return t_ - freshest_; }
    long last_generation() const { return last_gen_; }
    /// 1-based service phase of server 0 (S1) or 1 (S2); 0 when idle.
    int phase(int server) const { return servers_[static_cast<std::size_t>(server)].phase + 1; }
    /// Freezing clock min(t - last generation, k - 1), as tracked by the chains.
    int clock() const { return static_cast<int>(std::min<long>(t_ - last_gen_, std::max(cfg_.k, 1) - 1)); }
    const SystemConfig& config() const { return cfg_; }

private:
    struct Server {
        int phase = -1;  // 0-based, -1 = idle
        long gen = 0;
    };

    const DphDistribution& dist(int s) const { return s == 0 ? cfg_.dph1 : cfg_.dph2; }

    void start(int s) {
        Server& sv = servers_[static_cast<std::size_t>(s)];
        sv.phase = dist(s).initial_phase(rng_);
        sv.gen = t_;
        events_.generated_on |= 1 << s;
    }

    void try_generate(SlotEvents& ev) {
        const bool idle1 = servers_[0].phase < 0, idle2 = servers_[1].phase < 0;
        if (!(idle1 || idle2)) return;
        if (cfg_.k > 0 && t_ - last_gen_ < cfg_.k) return;
        if (idle1 && idle2) {
            if (cfg_.k == 0) {
                start(0);
                start(1);
            } else {
                start(cfg_.priority == PriorityPolicy::S1 ? 0 : 1);
            }
        } else {
            start(idle1 ? 0 : 1);
        }
        ev.generated = true;
        last_gen_ = t_;
    }

    SystemConfig cfg_;
    Rng rng_;
    std::array<Server, 2> servers_{};
    long t_ = 0;
    long freshest_ = -1;  // nothing received yet
    long last_gen_;
    SlotEvents events_{};
};

namespace detail {

inline void check_sim_args(const SystemConfig& cfg, long slots) {
    if (slots < kMinSimSlots)
        throw ModelError("simulate: slots must be >= " + std::to_string(kMinSimSlots) + ", got " +
                         std::to_string(slots));
    if (cfg.k < 0) throw ModelError("simulate: k must be >= 0");
}

// Slots discarded before statistics are collected.
inline long warmup_slots(long slots) { return slots / 100; }

inline int batch_of(long measured_index, long slots) {
    return static_cast<int>(measured_index * kBatches / slots);
}

inline Estimate batch_estimate(double point, const std::vector<double>& batch_values) {
    const double n = static_cast<double>(batch_values.size());
    double mean = 0.0;
    for (double b : batch_values) mean += b;
    mean /= n;
    double ss = 0.0;
    for (double b : batch_values) ss += (b - mean) * (b - mean);
    return {point, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Runs `slots` measured slots after a warm-up of slots/100 and reports AoI
/// and PAoI statistics with batch-means standard errors (kBatches batches of
/// consecutive slots).
inline SimResult simulate(const SystemConfig& cfg, long slots, std::uint64_t seed) {
    detail::check_sim_args(cfg, slots);
    SimResult r;
    r.slots = slots;
    r.warmup_slots = detail::warmup_slots(slots);
    r.seed = seed;
    r.rng_algorithm = std::string(Rng::algorithm);
    r.min_generation_gap = std::numeric_limits<long>::max();

    std::vector<double> b_sum(kBatches, 0.0), b_sq(kBatches, 0.0), b_peak(kBatches, 0.0);
    std::vector<long> b_cycles(kBatches, 0), b_slots(kBatches, 0);
    double sum = 0.0, sq = 0.0, peak_sum = 0.0;

    SlotSimulator sim(cfg, seed);
    long prev_gen = -1;
    long cycle_max = 0;
    const long total = r.warmup_slots + slots;
    for (long t = 1; t <= total; ++t) {
        const long before = sim.aoi();
        const SlotEvents& ev = sim.advance();
        if (t <= r.warmup_slots) {
            if (ev.generated) prev_gen = t;
            if (ev.fresh_receptions > 0) cycle_max = 0;
            cycle_max = std::max(cycle_max, sim.aoi());
            continue;
        }
        const int b = detail::batch_of(t - r.warmup_slots - 1, slots);
        const long a = sim.aoi();
        const double ad = static_cast<double>(a);
        if (static_cast<std::size_t>(a) >= r.aoi_histogram.size()) r.aoi_histogram.resize(static_cast<std::size_t>(a) + 1, 0);
        ++r.aoi_histogram[static_cast<std::size_t>(a)];
        sum += ad;
        sq += ad * ad;
        b_sum[static_cast<std::size_t>(b)] += ad;
        b_sq[static_cast<std::size_t>(b)] += ad * ad;
        ++b_slots[static_cast<std::size_t>(b)];
        r.obsolete_count += ev.obsolete_receptions;
        if (ev.fresh_receptions > 0) {
            ++r.cycles;
            peak_sum += static_cast<double>(ev.peak);
            b_peak[static_cast<std::size_t>(b)] += static_cast<double>(ev.peak);
            ++b_cycles[static_cast<std::size_t>(b)];
            if (ev.peak != before || ev.peak < cycle_max) ++r.peak_violations;
            cycle_max = 0;
        }
        cycle_max = std::max(cycle_max, a);
        if (ev.generated) {
            ++r.generations;
            if (prev_gen >= 0) r.min_generation_gap = std::min(r.min_generation_gap, t - prev_gen);
            prev_gen = t;
        }
    }
    if (r.min_generation_gap == std::numeric_limits<long>::max()) r.min_generation_gap = 0;

    std::vector<double> m1, m2, mp;
    for (int b = 0; b < kBatches; ++b) {
        const double n = static_cast<double>(b_slots[static_cast<std::size_t>(b)]);
        m1.push_back(b_sum[static_cast<std::size_t>(b)] / n);
        m2.push_back(b_sq[static_cast<std::size_t>(b)] / n);
        if (b_cycles[static_cast<std::size_t>(b)] > 0)
            mp.push_back(b_peak[static_cast<std::size_t>(b)] / static_cast<double>(b_cycles[static_cast<std::size_t>(b)]));
    }
    const double n = static_cast<double>(slots);
    r.aoi_mean = detail::batch_estimate(sum / n, m1);
    r.aoi_second_moment = detail::batch_estimate(sq / n, m2);
    if (r.cycles > 0 && mp.size() >= 2) {
        r.paoi_mean = detail::batch_estimate(peak_sum / static_cast<double>(r.cycles), mp);
    } else {
        r.paoi_mean = {r.cycles > 0 ? peak_sum / static_cast<double>(r.cycles) : 0.0,
                       std::numeric_limits<double>::infinity()};
    }
    return r;
}

/// Empirical distribution of the absorbing chain's starting state, collected
/// at every packet generation of a simulated sample path.
struct InitialCensus {
    AmcSpace space;
    Eigen::VectorXd counts;     // per AMC state index
    Eigen::VectorXd frequency;  // counts / total
    Eigen::VectorXd std_error;  // per entry
    long total = 0;
    long illegal = 0;  // generations that mapped to no legal starting state
};

/// Maps the system right after a generation to the starting state of the
/// absorbing chain: the class says where the new packet went and whether the
/// other server is still busy with an older one.
inline AmcState census_state(const SlotSimulator& sim, int generated_on) {
    const int p1 = sim.phase(0), p2 = sim.phase(1);
    if (generated_on == 1) return p2 > 0 ? AmcState{1, p1, p2, 0} : AmcState{5, p1, 0, 0};
    if (generated_on == 2) return p1 > 0 ? AmcState{4, p1, p2, 0} : AmcState{6, 0, p2, 0};
    return AmcState{0, 0, 0, 0};
}

/// Frequencies of the absorbing chain's starting states over the generations
/// in `slots` measured slots. Standard errors come from batch means over
/// kBatches slot batches, floored by the binomial error of the pooled count.
inline InitialCensus simulate_amc_initial_census(const SystemConfig& cfg, long slots, std::uint64_t seed) {
    detail::check_sim_args(cfg, slots);
    if (cfg.k < 1) throw ModelError("census: the absorbing chain needs k >= 1");
    InitialCensus c{AmcSpace(cfg.dph1.order(), cfg.dph2.order(), cfg.k), {}, {}, {}, 0, 0};
    const int m = c.space.size();
    c.counts = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd batch_counts = Eigen::MatrixXd::Zero(kBatches, m);
    Eigen::VectorXd batch_totals = Eigen::VectorXd::Zero(kBatches);

    SlotSimulator sim(cfg, seed);
    const long warm = detail::warmup_slots(slots);
    for (long t = 1; t <= warm + slots; ++t) {
        const SlotEvents& ev = sim.advance();
        if (t <= warm || !ev.generated) continue;
        const AmcState s = census_state(sim, ev.generated_on);
        const bool legal_class = s.cls == 1 || s.cls == 4 ||
                                 s.cls == (cfg.priority == PriorityPolicy::S1 ? 5 : 6);
        if (!legal_class || !c.space.contains(s)) {
            ++c.illegal;
            continue;
        }
        const int idx = c.space.index_of(s);
        const int b = detail::batch_of(t - warm - 1, slots);
        c.counts[idx] += 1.0;
        batch_counts(b, idx) += 1.0;
        batch_totals[b] += 1.0;
        ++c.total;
    }
    const double n = static_cast<double>(std::max<long>(c.total, 1));
    c.frequency = c.counts / n;
    c.std_error = Eigen::VectorXd::Zero(m);
    for (int idx = 0; idx < m; ++idx) {
        std::vector<double> per_batch;
        for (int b = 0; b < kBatches; ++b)
            if (batch_totals[b] > 0) per_batch.push_back(batch_counts(b, idx) / batch_totals[b]);
        const double p = c.frequency[idx];
        const double binomial = std::sqrt(p * (1.0 - p) / n);
        const double batched = per_batch.size() >= 2 ? detail::batch_estimate(p, per_batch).std_error : binomial;
        c.std_error[idx] = std::max(batched, binomial);
    }
    return c;
}

}  // namespace dtdq
