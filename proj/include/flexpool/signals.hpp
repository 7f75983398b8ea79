#pragma once
// Admissible daily force-off signals: dynamic-programming count and
// prefix-extension enumeration with on-the-fly pruning.
//
// A signal is a binary day plan at 15-minute resolution; bit = 1 means the
// device class is blocked ("forced off") during that step. Admissibility:
//   * bits forced to 0 during the nightly uncontrolled window,
//   * every maximal constant run (day-boundary runs included, measured by
//     their in-day length) >= min_constant_steps,
//   * number of value changes <= max_switches,
//   * total 1-bits <= max_on_steps (and <= max_off_steps; the stock
//     constraint table carries 96 there, which never binds).

#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/common.hpp"

namespace flexpool {

struct SignalConstraints {
    int horizon_steps = 96;
    int max_off_steps = 96;          // cap on blocked steps from the "force off max steps" row
    int min_constant_steps = 8;      // 2 h at 15-minute resolution
    int max_switches = 6;
    int max_on_steps = 48;           // 12 h of blocking per day
    int nightly_uncontrolled_steps = 20;  // 5 h window at day start forced to 0

    void validate() const;
    // True when the nightly window forbids a 1-bit at position pos.
    bool night(int pos) const { return pos < nightly_uncontrolled_steps; }
    int on_budget() const { return std::min(max_on_steps, max_off_steps); }
};

struct ForceOffSignal {
    // bits packed LSB-first: bit(i) = (words[i/64] >> (i%64)) & 1
    std::uint64_t words[2] = {0, 0};
    std::uint16_t n_off_steps = 0;  // number of 1-bits (blocked steps)
    std::uint8_t n_switches = 0;

    bool bit(int i) const { return (words[i >> 6] >> (i & 63)) & 1ULL; }
    void set_bit(int i) { words[i >> 6] |= 1ULL << (i & 63); }

    bool operator==(const ForceOffSignal& o) const {
        return words[0] == o.words[0] && words[1] == o.words[1];
    }
    // lexicographic order on the bit string b0 b1 ... b95
    bool lex_less(const ForceOffSignal& o, int horizon) const {
        for (int i = 0; i < horizon; ++i) {
            const bool a = bit(i), b = o.bit(i);
            if (a != b) return !a;
        }
        return false;
    }
};

// Independent validity check (no DP); used by tests and by enumerate()'s
// postcondition contract.
bool signal_admissible(const ForceOffSignal& sig, const SignalConstraints& c);

// Count admissible signals by dynamic programming without materializing them.
std::uint64_t count_signals(const SignalConstraints& c);

// Materialize every admissible signal in lexicographic order (0 < 1).
std::vector<ForceOffSignal> enumerate_signals(const SignalConstraints& c);

// Keep signals with n_off_steps <= max_off (the comfort-gate filter).
std::vector<ForceOffSignal> filter_by_off_budget(const std::vector<ForceOffSignal>& signals, int max_off);

// Deterministic thinning used by the emulation configs when the admissible
// set is too large to scan exhaustively per day: keeps every k-th signal of
// the lexicographic enumeration plus the all-zero signal. The optimizer
// remains exact over whatever list it is given.
std::vector<ForceOffSignal> subsample_signals(const std::vector<ForceOffSignal>& signals, std::size_t target_count);

// Compact bitset file (little-endian records of words/n_off_steps/n_switches)
// plus a JSON index sidecar at <path>.index.json carrying the count and the
// record layout. Round trips are byte-exact.
void save_signals(const std::string& path, const std::vector<ForceOffSignal>& signals);
std::vector<ForceOffSignal> load_signals(const std::string& path);

}  // namespace flexpool
