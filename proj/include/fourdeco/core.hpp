#pragma once

// Core domain types and numeric primitives shared by every other module:
// vocabulary with special symbols, token/alignment sequences, log-domain
// arithmetic, Levenshtein metrics and deterministic top-k selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fourdeco {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ── log-domain arithmetic ──────────────────────────────────────────────────

// log(exp(a) + exp(b)); -inf is the absorbing zero.
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

inline double log_add(double a, double b, double c) {
    return log_add(log_add(a, b), c);
}

// log sum_i exp(v_i) via max-shift. Empty input is an error.
inline double log_sum_exp(std::span<const double> values) {
    if (values.empty()) {
        throw std::invalid_argument("log_sum_exp: empty input");
    }
    double m = kNegInf;
    for (double v : values) m = std::max(m, v);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - m);
    return m + std::log(acc);
}

inline double log_sum_exp(const std::vector<double>& values) {
    return log_sum_exp(std::span<const double>(values));
}

// Log-softmax of a raw logit vector (shift-invariant by construction).
inline Vec log_softmax(const Vec& logits) {
    const double m = logits.maxCoeff();
    const double z = std::log((logits.array() - m).exp().sum());
    return logits.array() - m - z;
}

// ── deterministic RNG ──────────────────────────────────────────────────────

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled variate transforms so that every stream is
// bit-reproducible across platforms (std::*_distribution is not portable).
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    // derived, statistically independent stream
    Rng fork(uint64_t stream) const {
        return Rng(splitmix64(seed_ ^ splitmix64(stream)));
    }

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive range
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
        const uint64_t n = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(gen_() % n);
    }

    // Box-Muller; second variate cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
        const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // partial Fisher-Yates: k distinct values from 0..n-1, ascending order
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        std::iota(pool.begin(), pool.end(), 0);
        for (int i = 0; i < k; ++i) {
            std::swap(pool[i], pool[uniform_int(i, n - 1)]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            std::swap(v[i], v[uniform_int(0, i)]);
        }
    }

  private:
    uint64_t seed_;
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// ── token sequences and vocabulary ─────────────────────────────────────────

// Blank-free label sequence; comparable so beams can tie-break on it.
struct TokenSeq {
    std::vector<int> ids;

    TokenSeq() = default;
    explicit TokenSeq(std::vector<int> v) : ids(std::move(v)) {}

    int length() const { return static_cast<int>(ids.size()); }
    bool empty() const { return ids.empty(); }

    TokenSeq appended(int id) const {
        TokenSeq out(*this);
        out.ids.push_back(id);
        return out;
    }

    // true when *this is a (not necessarily proper) prefix of other
    bool is_prefix_of(const TokenSeq& other) const {
        if (ids.size() > other.ids.size()) return false;
        return std::equal(ids.begin(), ids.end(), other.ids.begin());
    }

    auto operator<=>(const TokenSeq&) const = default;
};

// Token inventory: regular tokens first, then the four special symbols.
// CTC/RNN-T output rows use slots [0, n_regular] with blank last; the
// attention head reuses slot n_regular for eos (the spaces never mix).
class Vocabulary {
  public:
    static Vocabulary with_specials(std::vector<std::string> regular) {
        Vocabulary v;
        v.tokens_ = std::move(regular);
        v.n_regular_ = static_cast<int>(v.tokens_.size());
        v.tokens_.push_back("<blank>");
        v.tokens_.push_back("<sos>");
        v.tokens_.push_back("<eos>");
        v.tokens_.push_back("<mask>");
        v.validate();
        return v;
    }

    // n single-letter tokens for n <= 26, else t00, t01, ...
    static Vocabulary synthetic(int n_regular) {
        if (n_regular < 1) throw std::invalid_argument("Vocabulary: need >= 1 token");
        std::vector<std::string> toks;
        toks.reserve(n_regular);
        for (int i = 0; i < n_regular; ++i) {
            if (n_regular <= 26) {
                toks.push_back(std::string(1, static_cast<char>('a' + i)));
            } else {
                toks.push_back("t" + std::to_string(i / 10) + std::to_string(i % 10));
            }
        }
        return with_specials(std::move(toks));
    }

    int n_regular() const { return n_regular_; }
    int size() const { return static_cast<int>(tokens_.size()); }

    int blank_id() const { return n_regular_; }
    int sos_id() const { return n_regular_ + 1; }
    int eos_id() const { return n_regular_ + 2; }
    int mask_id() const { return n_regular_ + 3; }

    // output-space sizes per decoder head
    int lattice_dim() const { return n_regular_ + 1; }  // tokens + blank
    int att_dim() const { return n_regular_ + 1; }      // tokens + eos slot
    int att_eos_slot() const { return n_regular_; }
    int mlm_dim() const { return n_regular_; }

    const std::string& token(int id) const {
        if (id < 0 || id >= size()) throw std::out_of_range("Vocabulary::token");
        return tokens_[static_cast<size_t>(id)];
    }

    // -1 when unknown
    int id_of(const std::string& s) const {
        for (int i = 0; i < size(); ++i) {
            if (tokens_[static_cast<size_t>(i)] == s) return i;
        }
        return -1;
    }

    const std::vector<std::string>& tokens() const { return tokens_; }

    void check_token_seq(const TokenSeq& y) const {
        for (int id : y.ids) {
            if (id < 0 || id >= n_regular_) {
                throw std::invalid_argument("TokenSeq: id outside regular vocabulary");
            }
        }
    }

  private:
    void validate() const {
        for (size_t i = 0; i < tokens_.size(); ++i) {
            for (size_t j = i + 1; j < tokens_.size(); ++j) {
                if (tokens_[i] == tokens_[j]) {
                    throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
                }
            }
        }
    }

    std::vector<std::string> tokens_;
    int n_regular_ = 0;
};

// ── feature / encoder / alignment sequences ────────────────────────────────

struct FeatureSeq {
    Mat frames;  // raw_frames x feat_dim

    int n_frames() const { return static_cast<int>(frames.rows()); }
    int dim() const { return static_cast<int>(frames.cols()); }

    void check() const {
        if (frames.rows() < 1) throw std::invalid_argument("FeatureSeq: need >= 1 frame");
        if (!frames.allFinite()) throw std::invalid_argument("FeatureSeq: non-finite values");
    }
};

struct EncodedSeq {
    Mat states;  // T x D

    int frames() const { return static_cast<int>(states.rows()); }
    int dim() const { return static_cast<int>(states.cols()); }

    void check() const {
        if (states.rows() < 1) throw std::invalid_argument("EncodedSeq: T must be >= 1");
        if (!states.allFinite()) throw std::invalid_argument("EncodedSeq: non-finite values");
    }
};

enum class AlignKind { Ctc, Rnnt };

// Frame-level (CTC, length T) or lattice (RNN-T, length T+S) symbol path.
struct AlignmentSeq {
    std::vector<int> labels;  // over V ∪ {blank}
    AlignKind kind = AlignKind::Ctc;

    void check(const Vocabulary& vocab, int frames) const {
        for (int l : labels) {
            if (l < 0 || l > vocab.blank_id()) {
                throw std::invalid_argument("AlignmentSeq: label outside V ∪ {blank}");
            }
        }
        const int blanks = static_cast<int>(
            std::count(labels.begin(), labels.end(), vocab.blank_id()));
        if (kind == AlignKind::Ctc) {
            if (static_cast<int>(labels.size()) != frames) {
                throw std::invalid_argument("AlignmentSeq: ctc path length must equal T");
            }
        } else {
            if (blanks != frames || labels.empty() || labels.back() != vocab.blank_id()) {
                throw std::invalid_argument(
                    "AlignmentSeq: rnnt path needs exactly T blanks and a trailing blank");
            }
        }
    }
};

// Standard CTC collapse B: merge adjacent repeats, then drop blanks.
inline TokenSeq collapse(const AlignmentSeq& alignment, const Vocabulary& vocab) {
    if (alignment.kind != AlignKind::Ctc) {
        throw std::invalid_argument("collapse: requires a ctc alignment");
    }
    TokenSeq out;
    int prev = -1;
    for (int l : alignment.labels) {
        if (l != prev && l != vocab.blank_id()) out.ids.push_back(l);
        prev = l;
    }
    return out;
}

// ── posterior lattice (CTC head output) ────────────────────────────────────

// Per-frame log-distributions over V ∪ {blank}; blank is the last column.
// Rows are normalized at construction, so shift-invariance w.r.t. raw
// logits holds by design.
class PosteriorLattice {
  public:
    static PosteriorLattice from_logits(const Mat& logits) {
        if (logits.rows() < 1 || logits.cols() < 2) {
            throw std::invalid_argument("PosteriorLattice: need >= 1 frame, >= 2 symbols");
        }
        if (!logits.allFinite()) {
            throw std::invalid_argument("PosteriorLattice: non-finite logits");
        }
        PosteriorLattice lat;
        lat.lp_ = logits;
        for (int t = 0; t < logits.rows(); ++t) {
            lat.lp_.row(t) = log_softmax(logits.row(t).transpose()).transpose();
        }
        return lat;
    }

    static PosteriorLattice from_log_probs(const Mat& lp) { return from_logits(lp); }

    int frames() const { return static_cast<int>(lp_.rows()); }
    int symbols() const { return static_cast<int>(lp_.cols()); }
    int blank() const { return symbols() - 1; }

    double lp(int t, int k) const { return lp_(t, k); }
    Vec frame(int t) const { return lp_.row(t).transpose(); }
    const Mat& log_probs() const { return lp_; }

  private:
    Mat lp_;
};

// ── decoder weights and beam configuration ─────────────────────────────────

// μ triple of §-style joint scoring; normalized to sum 1 at construction.
struct DecoderWeights {
    double mu_ctc = 0.0;
    double mu_att = 0.0;
    double mu_rnnt = 0.0;

    static DecoderWeights normalized(double ctc, double att, double rnnt) {
        if (ctc < 0 || att < 0 || rnnt < 0) {
            throw std::invalid_argument("DecoderWeights: negative weight");
        }
        const double s = ctc + att + rnnt;
        if (!(s > 0) || !std::isfinite(s)) {
            throw std::invalid_argument("DecoderWeights: weights must sum > 0");
        }
        return DecoderWeights{ctc / s, att / s, rnnt / s};
    }

    static DecoderWeights ctc_only() { return normalized(1, 0, 0); }
    static DecoderWeights att_only() { return normalized(0, 1, 0); }
    static DecoderWeights rnnt_only() { return normalized(0, 0, 1); }
};

struct BeamConfig {
    int k_beam = 4;
    int k_pre = 4;
    int max_output_len = 32;
    bool length_normalize = false;   // divide final joint score by max(1, S)
    bool finalize_full_scores = true;  // end-of-utterance rescoring (full CTC mass + eos)

    void check() const {
        if (k_beam < 1 || k_pre < 1) {
            throw std::invalid_argument("BeamConfig: k_beam and k_pre must be >= 1");
        }
        if (max_output_len < 0) {
            throw std::invalid_argument("BeamConfig: negative max_output_len");
        }
    }
};

// ── scorer states (data only; the scorers module drives them) ──────────────

// Frame-synchronous CTC prefix DP: masses of the prefix as a complete
// sequence within frames 1..t, split by whether the alignment ends in
// blank or in the last non-blank label.
struct CtcPrefixState {
    double log_pb = 0.0;      // empty alignment counts as ending in blank
    double log_pn = kNegInf;
    int frame = 0;            // frames consumed
    int last_token = -1;      // -1 for the empty prefix

    double score() const { return log_add(log_pb, log_pn); }
};

// Prediction-network state after consuming the prefix.
struct RnntDecState {
    Vec state;            // recurrent state; doubles as g_s
    int last_token = -1;  // last non-blank token, -1 at start
};

// Attention-decoder recurrent query state after consuming sos + prefix.
struct AttDecState {
    Vec state;
    int n_consumed = 0;  // prefix tokens consumed (sos excluded)
};

// Beam element shared by the searches; joint_score is always the
// μ-weighted combination of the three decoder scores.
struct Hypothesis {
    TokenSeq prefix;
    double score_ctc = 0.0;
    double score_att = 0.0;
    double score_rnnt = 0.0;
    double joint_score = 0.0;

    CtcPrefixState ctc_state;
    RnntDecState rnnt_state;
    AttDecState att_state;

    void combine(const DecoderWeights& mu) {
        joint_score = mu.mu_ctc * score_ctc + mu.mu_att * score_att + mu.mu_rnnt * score_rnnt;
    }
};

// ── edit distance ──────────────────────────────────────────────────────────

struct EditStats {
    int distance = 0;
    int substitutions = 0;
    int insertions = 0;
    int deletions = 0;

    double error_rate(int ref_len) const {
        return static_cast<double>(distance) / std::max(1, ref_len);
    }
};

// Levenshtein with unit costs. On cost ties the breakdown prefers
// match/substitution, then deletion, then insertion.
inline EditStats edit_distance(const TokenSeq& ref, const TokenSeq& hyp) {
    const int r = ref.length();
    const int h = hyp.length();
    struct Cell {
        int cost, sub, ins, del;
    };
    std::vector<Cell> prev(static_cast<size_t>(h) + 1), cur(static_cast<size_t>(h) + 1);
    for (int j = 0; j <= h; ++j) prev[static_cast<size_t>(j)] = {j, 0, j, 0};
    for (int i = 1; i <= r; ++i) {
        cur[0] = {i, 0, 0, i};
        for (int j = 1; j <= h; ++j) {
            const bool match = ref.ids[static_cast<size_t>(i - 1)] == hyp.ids[static_cast<size_t>(j - 1)];
            Cell diag = prev[static_cast<size_t>(j - 1)];
            diag.cost += match ? 0 : 1;
            diag.sub += match ? 0 : 1;
            Cell del = prev[static_cast<size_t>(j)];
            del.cost += 1;
            del.del += 1;
            Cell ins = cur[static_cast<size_t>(j - 1)];
            ins.cost += 1;
            ins.ins += 1;
            Cell best = diag;
            if (del.cost < best.cost) best = del;
            if (ins.cost < best.cost) best = ins;
            cur[static_cast<size_t>(j)] = best;
        }
        std::swap(prev, cur);
    }
    const Cell& c = prev[static_cast<size_t>(h)];
    return EditStats{c.cost, c.sub, c.ins, c.del};
}

// ── deterministic top-k ────────────────────────────────────────────────────

namespace detail {
inline double item_score(const Hypothesis& h) { return h.joint_score; }
inline const TokenSeq& item_key(const Hypothesis& h) { return h.prefix; }
inline double item_score(const std::pair<TokenSeq, double>& p) { return p.second; }
inline const TokenSeq& item_key(const std::pair<TokenSeq, double>& p) { return p.first; }
}  // namespace detail

// k highest-scoring items, ties broken by lexicographic order of the
// prefix ids; returns everything (sorted) when fewer than k.
template <typename Item>
std::vector<Item> top_k(std::vector<Item> items, int k) {
    if (k < 1) throw std::invalid_argument("top_k: k must be >= 1");
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
        const double sa = detail::item_score(a);
        const double sb = detail::item_score(b);
        if (sa != sb) return sa > sb;
        return detail::item_key(a) < detail::item_key(b);
    });
    if (static_cast<int>(items.size()) > k) items.resize(static_cast<size_t>(k));
    return items;
}

}  // namespace fourdeco
