#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace dtdq {

/// Transient state (class, i, j, l) of the absorbing chain started at the
/// generation of the tagged packet P*.
///
/// Classes 1-6 hold P* in service, classes 7-14 are the post-reception
/// ("non-P*") states. i and j are the service phases of S1 and S2 (1-based,
/// 0 = idle) and l is the freezing clock. Class 8 carries no clock; it is
/// stored as l = 0.
struct AmcState {
    int cls = 0;
    int i = 0;
    int j = 0;
    int l = 0;
    auto operator<=>(const AmcState&) const = default;
};

/// State (class, i, j, l) of the recurrent server-occupancy chain.
/// Class 1: both idle, 2: S1 busy only, 3: S2 busy only, 4: both busy.
struct RmcState {
    int cls = 0;
    int i = 0;
    int j = 0;
    int l = 0;
    auto operator<=>(const RmcState&) const = default;
};

inline std::string to_string(const AmcState& s) {
    if (s.cls == 8) return "(8," + std::to_string(s.i) + "," + std::to_string(s.j) + ")";
    return "(" + std::to_string(s.cls) + "," + std::to_string(s.i) + "," + std::to_string(s.j) + "," +
           std::to_string(s.l) + ")";
}

inline std::string to_string(const RmcState& s) {
    return "(" + std::to_string(s.cls) + "," + std::to_string(s.i) + "," + std::to_string(s.j) + "," +
           std::to_string(s.l) + ")_R";
}

/// Per-class occupancy pattern: whether S1 / S2 hold a packet and whether
/// the freezing clock is tracked.
struct ClassShape {
    bool s1_busy;
    bool s2_busy;
    bool clocked;
};

template <typename State>
struct ChainTraits;

template <>
struct ChainTraits<AmcState> {
    static constexpr int kClasses = 14;
    static constexpr const char* kName = "AMC";
    static constexpr ClassShape shape(int cls) {
        switch (cls) {
            case 1: case 2: case 3: case 4: case 11: case 12: return {true, true, true};
            case 5: case 9: case 13: return {true, false, true};
            case 6: case 10: case 14: return {false, true, true};
            case 7: return {false, false, true};
            case 8: return {true, true, false};
            default: return {false, false, false};
        }
    }
};

template <>
struct ChainTraits<RmcState> {
    static constexpr int kClasses = 4;
    static constexpr const char* kName = "RMC";
    static constexpr ClassShape shape(int cls) {
        switch (cls) {
            case 1: return {false, false, true};
            case 2: return {true, false, true};
            case 3: return {false, true, true};
            case 4: return {true, true, true};
            default: return {false, false, false};
        }
    }
};

/// Canonical enumeration of a chain's states with O(1) index lookup.
///
/// Order is class-major, then clock l, then S1 phase i, then S2 phase j.
template <typename State>
class StateSpace {
public:
    using Traits = ChainTraits<State>;

    StateSpace(int n1, int n2, int k) : n1_(n1), n2_(n2), k_(k) {
        if (n1 < 1 || n2 < 1) throw ModelError("state space: DPH orders must be >= 1");
        if (k < 1)
            throw ModelError("state space: freezing parameter k must be >= 1 for the Markov models "
                             "(k = 0 is handled by the simulator)");
        lookup_.assign(static_cast<std::size_t>(Traits::kClasses + 1) * static_cast<std::size_t>(k_) *
                           static_cast<std::size_t>(n1_ + 1) * static_cast<std::size_t>(n2_ + 1),
                       -1);
        for (int cls = 1; cls <= Traits::kClasses; ++cls) {
            const ClassShape sh = Traits::shape(cls);
            const int clocks = sh.clocked ? k_ : 1;
            const int i_lo = sh.s1_busy ? 1 : 0, i_hi = sh.s1_busy ? n1_ : 0;
            const int j_lo = sh.s2_busy ? 1 : 0, j_hi = sh.s2_busy ? n2_ : 0;
            for (int l = 0; l < clocks; ++l)
                for (int i = i_lo; i <= i_hi; ++i)
                    for (int j = j_lo; j <= j_hi; ++j) {
                        const State s{cls, i, j, l};
                        lookup_[key(s)] = static_cast<int>(states_.size());
                        states_.push_back(s);
                    }
        }
    }

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    int k() const { return k_; }
    int size() const { return static_cast<int>(states_.size()); }
    const std::vector<State>& states() const { return states_; }

    bool contains(const State& s) const { return valid(s) && lookup_[key(s)] >= 0; }

    int index_of(const State& s) const {
        if (!valid(s)) throw ModelError(std::string(Traits::kName) + " state " + to_string(s) + " is not valid");
        return lookup_[key(s)];
    }

    const State& state_of(int index) const {
        if (index < 0 || index >= size())
            throw ModelError(std::string(Traits::kName) + " index " + std::to_string(index) + " out of range [0, " +
                             std::to_string(size()) + ")");
        return states_[static_cast<std::size_t>(index)];
    }

private:
    bool valid(const State& s) const {
        if (s.cls < 1 || s.cls > Traits::kClasses) return false;
        const ClassShape sh = Traits::shape(s.cls);
        if (sh.s1_busy ? (s.i < 1 || s.i > n1_) : s.i != 0) return false;
        if (sh.s2_busy ? (s.j < 1 || s.j > n2_) : s.j != 0) return false;
        if (sh.clocked ? (s.l < 0 || s.l >= k_) : s.l != 0) return false;
        return true;
    }

    std::size_t key(const State& s) const {
        return ((static_cast<std::size_t>(s.cls) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(s.l)) *
                    static_cast<std::size_t>(n1_ + 1) +
                static_cast<std::size_t>(s.i)) *
                   static_cast<std::size_t>(n2_ + 1) +
               static_cast<std::size_t>(s.j);
    }

    int n1_, n2_, k_;
    std::vector<State> states_;
    std::vector<int> lookup_;
};

using AmcSpace = StateSpace<AmcState>;
using RmcSpace = StateSpace<RmcState>;

inline AmcSpace enumerate_amc(int n1, int n2, int k) { return AmcSpace(n1, n2, k); }
inline RmcSpace enumerate_rmc(int n1, int n2, int k) { return RmcSpace(n1, n2, k); }

/// Closed-form transient count M = k(6 N1 N2 + 3(N1 + N2) + 1) + N1 N2.
inline long amc_size(long n1, long n2, long k) { return k * (6 * n1 * n2 + 3 * (n1 + n2) + 1) + n1 * n2; }

inline long rmc_size(long n1, long n2, long k) { return k * (n1 * n2 + n1 + n2 + 1); }

}  // namespace dtdq
