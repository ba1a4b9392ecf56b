#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "zrnorm/error.hpp"

namespace zrnorm {

/// Anything that gives conditional log-probabilities over unit sequences.
///
/// Symbols 0..K-1 are units, K is the end-of-sequence symbol and K+1 the start padding
/// (only ever seen in contexts). The context passed to conditional_logprob() always holds
/// exactly context_length() symbols, left-padded with the start symbol.
class UnitLanguageModel {
public:
    virtual ~UnitLanguageModel() = default;

    virtual std::size_t vocab_size() const = 0; // K
    virtual std::size_t context_length() const = 0;
    virtual bool scores_end() const = 0;
    virtual double conditional_logprob(std::span<const std::uint32_t> context, std::uint32_t symbol) const = 0;

    std::uint32_t end_symbol() const { return static_cast<std::uint32_t>(vocab_size()); }
    std::uint32_t start_symbol() const { return static_cast<std::uint32_t>(vocab_size() + 1); }
};

/// Per-symbol conditional log-probabilities of a unit sequence by the chain rule, plus the end
/// symbol when `include_end`.
inline std::vector<double> token_logprobs(const UnitLanguageModel& lm, std::span<const std::uint32_t> units,
                                          bool include_end) {
    const std::size_t n = lm.context_length();
    std::vector<std::uint32_t> padded(n, lm.start_symbol());
    for (auto u : units) {
        if (u >= lm.vocab_size())
            throw InvalidArgument("unit " + std::to_string(u) + " outside vocabulary of size " + std::to_string(lm.vocab_size()));
        padded.push_back(u);
    }
    if (include_end) padded.push_back(lm.end_symbol());
    std::vector<double> out;
    out.reserve(padded.size() - n);
    for (std::size_t i = n; i < padded.size(); ++i)
        out.push_back(lm.conditional_logprob(std::span<const std::uint32_t>(padded.data() + i - n, n), padded[i]));
    return out;
}

/// log P(q_1..q_N) = sum_k log P(q_k | q_1..q_{k-1}); includes the end symbol when the model scores it.
inline double sequence_logprob(const UnitLanguageModel& lm, std::span<const std::uint32_t> units) {
    double s = 0.0;
    for (double v : token_logprobs(lm, units, lm.scores_end())) s += v;
    return s;
}

/// Context-free model assigning 1/K to every unit; never scores an end symbol.
class UniformLm final : public UnitLanguageModel {
public:
    explicit UniformLm(std::size_t k) : k_(k) {
        if (k == 0) throw InvalidArgument("UniformLm: K must be positive");
    }
    std::size_t vocab_size() const override { return k_; }
    std::size_t context_length() const override { return 0; }
    bool scores_end() const override { return false; }
    double conditional_logprob(std::span<const std::uint32_t>, std::uint32_t symbol) const override {
        if (symbol >= k_) throw InvalidArgument("UniformLm: symbol out of range");
        return -std::log(static_cast<double>(k_));
    }

private:
    std::size_t k_;
};

namespace ngram_detail {

struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (auto s : v) {
            h ^= s + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

using Key = std::vector<std::uint32_t>;

struct ContextStats {
    double total = 0.0;     // sum of counts following the context
    double types = 0.0;     // distinct symbols following the context
};

struct Level {
    std::unordered_map<Key, double, KeyHash> counts;
    std::unordered_map<Key, ContextStats, KeyHash> contexts;
};

} // namespace ngram_detail

/// Interpolated Kneser-Ney n-gram model over a closed vocabulary of K units plus an end symbol.
///
/// The highest order uses raw counts, lower orders continuation counts (number of distinct
/// left extensions), each with the same absolute discount. The unigram level interpolates with
/// the uniform distribution over K+1 symbols, so every probability is positive.
class NgramLm final : public UnitLanguageModel {
public:
    NgramLm(std::size_t k, std::size_t order, double discount) : k_(k), order_(order), discount_(discount) {
        if (k == 0) throw InvalidArgument("NgramLm: K must be positive");
        if (order == 0) throw InvalidArgument("NgramLm: order must be >= 1");
        if (!(discount > 0.0 && discount <= 1.0)) throw InvalidArgument("NgramLm: discount must be in (0, 1]");
        levels_.resize(order + 1);
    }

    static NgramLm train(const std::vector<std::vector<std::uint32_t>>& corpus, std::size_t k, std::size_t order,
                         double discount = 0.75) {
        if (corpus.empty()) throw InvalidArgument("train_ngram: empty corpus");
        NgramLm lm(k, order, discount);
        auto& top = lm.levels_[order].counts;
        for (const auto& seq : corpus) {
            ngram_detail::Key padded(order - 1, lm.start_symbol());
            for (auto u : seq) {
                if (u >= k) throw InvalidArgument("train_ngram: unit " + std::to_string(u) + " >= K=" + std::to_string(k));
                padded.push_back(u);
            }
            padded.push_back(lm.end_symbol());
            for (std::size_t i = order - 1; i < padded.size(); ++i)
                top[ngram_detail::Key(padded.begin() + static_cast<std::ptrdiff_t>(i + 1 - order),
                                      padded.begin() + static_cast<std::ptrdiff_t>(i + 1))] += 1.0;
        }
        lm.derive_lower_orders();
        return lm;
    }

    std::size_t vocab_size() const override { return k_; }
    std::size_t context_length() const override { return order_ - 1; }
    bool scores_end() const override { return true; }
    std::size_t order() const noexcept { return order_; }
    double discount() const noexcept { return discount_; }

    /// P(symbol | context); `context` holds the order-1 preceding symbols.
    double conditional_prob(std::span<const std::uint32_t> context, std::uint32_t symbol) const {
        if (context.size() != order_ - 1) throw InvalidArgument("NgramLm: context must have order-1 symbols");
        if (symbol > k_) throw InvalidArgument("NgramLm: symbol out of range");
        double p = 1.0 / static_cast<double>(k_ + 1);
        ngram_detail::Key key;
        for (std::size_t m = 1; m <= order_; ++m) {
            key.assign(context.end() - static_cast<std::ptrdiff_t>(m - 1), context.end());
            const auto& level = levels_[m];
            auto ctx = level.contexts.find(key);
            if (ctx == level.contexts.end()) continue;
            key.push_back(symbol);
            auto c = level.counts.find(key);
            const double count = c == level.counts.end() ? 0.0 : c->second;
            p = (std::max(count - discount_, 0.0) + discount_ * ctx->second.types * p) / ctx->second.total;
        }
        return p;
    }

    double conditional_logprob(std::span<const std::uint32_t> context, std::uint32_t symbol) const override {
        return std::log(conditional_prob(context, symbol));
    }

    /// Highest-order counts, sorted; together with (K, order, discount) they define the model.
    std::vector<std::pair<ngram_detail::Key, double>> top_counts() const {
        std::vector<std::pair<ngram_detail::Key, double>> out(levels_[order_].counts.begin(), levels_[order_].counts.end());
        std::sort(out.begin(), out.end());
        return out;
    }

    /// Contexts observed at the highest order.
    std::vector<ngram_detail::Key> observed_contexts() const {
        std::vector<ngram_detail::Key> out;
        for (const auto& [ctx, st] : levels_[order_].contexts) out.push_back(ctx);
        std::sort(out.begin(), out.end());
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "zrnorm-ngram";
        j["vocab_size"] = k_;
        j["order"] = order_;
        j["discount"] = discount_;
        auto& rows = j["ngrams"] = nlohmann::json::array();
        for (const auto& [key, c] : top_counts()) {
            nlohmann::json row = key;
            row.push_back(c);
            rows.push_back(std::move(row));
        }
        return j;
    }

    static NgramLm from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "zrnorm-ngram") throw ParseError(0, "not an n-gram model file");
        NgramLm lm(j.at("vocab_size").get<std::size_t>(), j.at("order").get<std::size_t>(), j.at("discount").get<double>());
        auto& top = lm.levels_[lm.order_].counts;
        for (const auto& row : j.at("ngrams")) {
            if (row.size() != lm.order_ + 1) throw ParseError(0, "n-gram row has wrong arity");
            ngram_detail::Key key;
            for (std::size_t i = 0; i < lm.order_; ++i) {
                const auto s = row[i].get<std::uint32_t>();
                if (s > lm.k_ + 1) throw ParseError(0, "n-gram symbol out of range");
                key.push_back(s);
            }
            top[key] = row[lm.order_].get<double>();
        }
        lm.derive_lower_orders();
        return lm;
    }

private:
    void derive_lower_orders() {
        for (std::size_t m = order_ - 1; m >= 1; --m) {
            auto& lower = levels_[m].counts;
            lower.clear();
            for (const auto& [g, c] : levels_[m + 1].counts) lower[ngram_detail::Key(g.begin() + 1, g.end())] += 1.0;
        }
        for (std::size_t m = 1; m <= order_; ++m) {
            auto& level = levels_[m];
            level.contexts.clear();
            for (const auto& [g, c] : level.counts) {
                auto& st = level.contexts[ngram_detail::Key(g.begin(), g.end() - 1)];
                st.total += c;
                st.types += 1.0;
            }
        }
    }

    std::size_t k_;
    std::size_t order_;
    double discount_;
    std::vector<ngram_detail::Level> levels_; // index = n-gram order
};

} // namespace zrnorm
