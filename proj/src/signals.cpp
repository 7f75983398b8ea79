#include "flexpool/signals.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

namespace flexpool {

void SignalConstraints::validate() const {
    if (horizon_steps < 1 || horizon_steps > 96)
        throw std::invalid_argument("SignalConstraints: horizon_steps must be in [1, 96]");
    if (min_constant_steps < 1)
        throw std::invalid_argument("SignalConstraints: min_constant_steps must be >= 1");
    if (max_switches < 0 || max_on_steps < 0 || max_off_steps < 0 || nightly_uncontrolled_steps < 0)
        throw std::invalid_argument("SignalConstraints: negative constraint value");
    if (nightly_uncontrolled_steps > horizon_steps)
        throw std::invalid_argument("SignalConstraints: nightly window exceeds horizon");
    if (min_constant_steps > 1000)
        throw std::invalid_argument("SignalConstraints: min_constant_steps implausibly large");
}

bool signal_admissible(const ForceOffSignal& sig, const SignalConstraints& c) {
    const int H = c.horizon_steps;
    int ones = 0, switches = 0, run = 1;
    for (int i = 0; i < H; ++i) {
        const bool b = sig.bit(i);
        if (b && c.night(i)) return false;
        ones += b;
        if (i > 0 && b != sig.bit(i - 1)) ++switches;
    }
    for (int i = H; i < 96; ++i) {
        if (sig.bit(i)) return false;  // no stray bits beyond the horizon
    }
    if (ones > c.on_budget()) return false;
    if (switches > c.max_switches) return false;
    for (int i = 1; i <= H; ++i) {
        const bool boundary = (i == H) || (sig.bit(i) != sig.bit(i - 1));
        if (boundary) {
            if (run < c.min_constant_steps) return false;
            run = 1;
        } else {
            ++run;
        }
    }
    return true;
}

namespace {

// Suffix-count DP shared by the counter and the enumerator. State after
// placing bits [0, pos): value of the last bit, length of the current run
// capped at min_constant_steps (all longer runs behave identically), switch
// count, 1-bit count. Precondition: min_constant_steps <= horizon_steps.
class SignalDp {
public:
    explicit SignalDp(const SignalConstraints& c)
        : c_(c),
          H_(c.horizon_steps),
          minc_(c.min_constant_steps),
          budget_(std::min(c.on_budget(), c.horizon_steps)),
          run_dim_(minc_ + 1),
          sw_dim_(c.max_switches + 1),
          ones_dim_(budget_ + 1),
          memo_(static_cast<std::size_t>(H_ + 1) * 2 * run_dim_ * sw_dim_ * ones_dim_, -1) {}

    // number of admissible completions of a prefix ending just before pos
    std::int64_t count_from(int pos, int last, int run, int sw, int ones) {
        const int runcap = std::min(run, minc_);
        std::int64_t& slot = memo_[idx(pos, last, runcap, sw, ones)];
        if (slot >= 0) return slot;
        std::int64_t total = 0;
        if (pos == H_) {
            // the final maximal run, measured by its in-day length, must also
            // satisfy the min-constant rule
            total = runcap >= minc_ ? 1 : 0;
        } else {
            for (int b = 0; b <= 1; ++b) {
                if (b == 1 && (c_.night(pos) || ones + 1 > budget_)) continue;
                if (b == last) {
                    total += count_from(pos + 1, b, runcap + 1, sw, ones + b);
                } else {
                    if (runcap < minc_) continue;          // current run too short to end
                    if (sw + 1 > c_.max_switches) continue;
                    if (H_ - pos < minc_) continue;        // new run cannot reach min length
                    total += count_from(pos + 1, b, 1, sw + 1, ones + b);
                }
            }
        }
        slot = total;
        return total;
    }

    std::int64_t total() {
        std::int64_t t = count_from(1, 0, 1, 0, 0);
        if (!c_.night(0) && budget_ >= 1) t += count_from(1, 1, 1, 0, 1);
        return t;
    }

    const SignalConstraints& constraints() const { return c_; }
    int horizon() const { return H_; }
    int budget() const { return budget_; }
    int minc() const { return minc_; }

private:
    std::size_t idx(int pos, int last, int runcap, int sw, int ones) const {
        return (((static_cast<std::size_t>(pos) * 2 + last) * run_dim_ + runcap) * sw_dim_ + sw) * ones_dim_ + ones;
    }

    SignalConstraints c_;
    int H_, minc_, budget_, run_dim_, sw_dim_, ones_dim_;
    std::vector<std::int64_t> memo_;
};

// Prefix-extension DFS; consults the suffix DP so only prefixes with at least
// one admissible completion are expanded. Trying 0 before 1 yields the
// canonical lexicographic order.
void enumerate_rec(SignalDp& dp, int pos, int last, int run, int sw, int ones,
                   ForceOffSignal& cur, std::vector<ForceOffSignal>& out) {
    if (pos == dp.horizon()) {
        cur.n_off_steps = static_cast<std::uint16_t>(ones);
        cur.n_switches = static_cast<std::uint8_t>(sw);
        out.push_back(cur);
        return;
    }
    const SignalConstraints& c = dp.constraints();
    for (int b = 0; b <= 1; ++b) {
        if (b == 1 && (c.night(pos) || ones + 1 > dp.budget())) continue;
        int nrun, nsw;
        if (b == last) {
            nrun = run + 1;
            nsw = sw;
        } else {
            if (run < dp.minc() || sw + 1 > c.max_switches || dp.horizon() - pos < dp.minc()) continue;
            nrun = 1;
            nsw = sw + 1;
        }
        if (dp.count_from(pos + 1, b, nrun, nsw, ones + b) == 0) continue;
        if (b) cur.set_bit(pos);
        enumerate_rec(dp, pos + 1, b, nrun, nsw, ones + b, cur, out);
        if (b) cur.words[pos >> 6] &= ~(1ULL << (pos & 63));
    }
}

}  // namespace

std::uint64_t count_signals(const SignalConstraints& c) {
    c.validate();
    if (c.min_constant_steps > c.horizon_steps) return 0;
    SignalDp dp(c);
    return static_cast<std::uint64_t>(dp.total());
}

std::vector<ForceOffSignal> enumerate_signals(const SignalConstraints& c) {
    c.validate();
    std::vector<ForceOffSignal> out;
    if (c.min_constant_steps > c.horizon_steps) return out;
    SignalDp dp(c);
    out.reserve(static_cast<std::size_t>(dp.total()));
    ForceOffSignal cur;
    if (dp.count_from(1, 0, 1, 0, 0) > 0) enumerate_rec(dp, 1, 0, 1, 0, 0, cur, out);
    if (!c.night(0) && dp.budget() >= 1 && dp.count_from(1, 1, 1, 0, 1) > 0) {
        cur.set_bit(0);
        enumerate_rec(dp, 1, 1, 1, 0, 1, cur, out);
        cur.words[0] &= ~1ULL;
    }
    return out;
}

std::vector<ForceOffSignal> filter_by_off_budget(const std::vector<ForceOffSignal>& signals, int max_off) {
    if (max_off < 0) throw std::invalid_argument("filter_by_off_budget: max_off must be >= 0");
    std::vector<ForceOffSignal> out;
    out.reserve(signals.size());
    for (const auto& s : signals) {
        if (s.n_off_steps <= max_off) out.push_back(s);
    }
    return out;
}

std::vector<ForceOffSignal> subsample_signals(const std::vector<ForceOffSignal>& signals, std::size_t target_count) {
    if (target_count == 0) throw std::invalid_argument("subsample_signals: target_count must be >= 1");
    if (signals.size() <= target_count) return signals;
    const std::size_t stride = (signals.size() + target_count - 1) / target_count;
    std::vector<ForceOffSignal> out;
    out.reserve(target_count + 1);
    for (std::size_t i = 0; i < signals.size(); i += stride) out.push_back(signals[i]);
    // the all-zero signal is lexicographically first, so index 0 covers it
    return out;
}

namespace {
constexpr char kSignalMagic[8] = {'F', 'P', 'S', 'G', '0', '0', '0', '1'};
}

void save_signals(const std::string& path, const std::vector<ForceOffSignal>& signals) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_signals: cannot open " + path);
    f.write(kSignalMagic, sizeof(kSignalMagic));
    const std::uint64_t n = signals.size();
    f.write(reinterpret_cast<const char*>(&n), sizeof(n));
    for (const auto& s : signals) {
        f.write(reinterpret_cast<const char*>(s.words), sizeof(s.words));
        f.write(reinterpret_cast<const char*>(&s.n_off_steps), sizeof(s.n_off_steps));
        f.write(reinterpret_cast<const char*>(&s.n_switches), sizeof(s.n_switches));
    }
    if (!f) throw std::runtime_error("save_signals: write failed");
    f.close();

    std::ofstream sf(path + ".index.json", std::ios::trunc);
    if (!sf) throw std::runtime_error("save_signals: cannot open index sidecar");
    sf << "{\n  \"count\": " << n << ",\n  \"record_bytes\": 19,\n"
       << "  \"layout\": \"words[2]:u64le, n_off_steps:u16le, n_switches:u8\"\n}\n";
}

std::vector<ForceOffSignal> load_signals(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_signals: cannot open " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || !std::equal(magic, magic + 8, kSignalMagic))
        throw std::runtime_error("load_signals: bad magic");
    std::uint64_t n = 0;
    f.read(reinterpret_cast<char*>(&n), sizeof(n));
    std::vector<ForceOffSignal> out(n);
    for (auto& s : out) {
        f.read(reinterpret_cast<char*>(s.words), sizeof(s.words));
        f.read(reinterpret_cast<char*>(&s.n_off_steps), sizeof(s.n_off_steps));
        f.read(reinterpret_cast<char*>(&s.n_switches), sizeof(s.n_switches));
    }
    if (!f) throw std::runtime_error("load_signals: file truncated");
    return out;
}

}  // namespace flexpool
