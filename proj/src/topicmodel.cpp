#include "hazardtm/topicmodel.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hazardtm/binio.hpp"
#include "hazardtm/csv.hpp"
#include "hazardtm/error.hpp"
#include "hazardtm/hash.hpp"

namespace hazardtm::topicmodel {

namespace {

constexpr char kModelMagic[9] = "HTMTOPIC";
constexpr std::uint32_t kModelVersion = 1;
constexpr double kPriorFloor = 1e-6;
constexpr double kMuEps = 1e-300;

using boost::math::digamma;

std::size_t count_nonempty(const features::DocTermMatrix& m) {
    std::size_t n = 0;
    for (std::size_t d = 0; d < m.num_docs; ++d) n += m.row_empty(d) ? 0 : 1;
    return n;
}

void check_rows_simplex(std::vector<double>& rows, std::size_t width, std::vector<bool>& flags) {
    const std::size_t n = width == 0 ? 0 : rows.size() / width;
    flags.assign(n, false);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < width; ++c) s += rows[r * width + c];
        if (!(s > 0.0) || !std::isfinite(s)) {
            flags[r] = true;
            for (std::size_t c = 0; c < width; ++c) rows[r * width + c] = 1.0 / static_cast<double>(width);
        } else {
            for (std::size_t c = 0; c < width; ++c) rows[r * width + c] /= s;
        }
    }
}

// Sample index proportional to weights[0..n).
std::size_t draw(std::mt19937_64& rng, const double* cumulative, std::size_t n) {
    const double u = unit_double(rng()) * cumulative[n - 1];
    const auto* it = std::upper_bound(cumulative, cumulative + n, u);
    return std::min(static_cast<std::size_t>(it - cumulative), n - 1);
}

struct GibbsState {
    std::size_t K = 0;
    std::size_t W = 0;
    std::vector<std::vector<std::uint32_t>> words;  // per training doc
    std::vector<std::vector<std::uint32_t>> z;
    std::vector<std::uint32_t> n_dk;                // docs x K
    std::vector<std::uint32_t> n_kw;                // K x W
    std::vector<std::uint64_t> n_k;
    std::uint64_t total_tokens = 0;
};

void check_conservation(const GibbsState& s) {
    std::uint64_t grand = 0;
    for (std::size_t d = 0; d < s.words.size(); ++d) {
        std::uint64_t sum = 0;
        for (std::size_t k = 0; k < s.K; ++k) sum += s.n_dk[d * s.K + k];
        if (sum != s.words[d].size()) throw std::logic_error("Gibbs invariant: document-topic counts drifted");
    }
    for (std::size_t k = 0; k < s.K; ++k) {
        std::uint64_t sum = 0;
        for (std::size_t w = 0; w < s.W; ++w) sum += s.n_kw[k * s.W + w];
        if (sum != s.n_k[k]) throw std::logic_error("Gibbs invariant: topic-term counts drifted");
        grand += sum;
    }
    if (grand != s.total_tokens) throw std::logic_error("Gibbs invariant: token total drifted");
}

// Minka's fixed-point iteration for an asymmetric Dirichlet over
// document-topic counts.
void update_alpha(const GibbsState& s, std::vector<double>& alpha) {
    const std::size_t D = s.words.size();
    for (int iter = 0; iter < 20; ++iter) {
        const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
        double denom = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            denom += digamma(static_cast<double>(s.words[d].size()) + alpha_sum) - digamma(alpha_sum);
        }
        double max_change = 0.0;
        for (std::size_t k = 0; k < s.K; ++k) {
            double num = 0.0;
            const double dg = digamma(alpha[k]);
            for (std::size_t d = 0; d < D; ++d) {
                const auto c = s.n_dk[d * s.K + k];
                if (c > 0) num += digamma(c + alpha[k]) - dg;
            }
            const double next = std::max(kPriorFloor, alpha[k] * num / denom);
            max_change = std::max(max_change, std::abs(next - alpha[k]));
            alpha[k] = next;
        }
        if (max_change < 1e-8) break;
    }
}

// Same estimator for a symmetric topic-term prior.
void update_eta(const GibbsState& s, double& eta) {
    const double W = static_cast<double>(s.W);
    for (int iter = 0; iter < 20; ++iter) {
        double num = 0.0;
        const double dg = digamma(eta);
        for (auto c : s.n_kw) {
            if (c > 0) num += digamma(c + eta) - dg;
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < s.K; ++k) {
            denom += digamma(static_cast<double>(s.n_k[k]) + W * eta) - digamma(W * eta);
        }
        denom *= W;
        const double next = std::max(kPriorFloor, eta * num / denom);
        const double change = std::abs(next - eta);
        eta = next;
        if (change < 1e-10) break;
    }
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::LDA ? "lda" : "nmf"; }

ModelKind model_kind_from_string(std::string_view name) {
    if (name == "lda" || name == "LDA") return ModelKind::LDA;
    if (name == "nmf" || name == "NMF") return ModelKind::NMF;
    throw Error(ErrorCode::ConfigError, "unknown model kind '" + std::string(name) + "'");
}

void LDAConfig::validate() const {
    if (num_topics < 1) throw Error(ErrorCode::ConfigError, "LDA needs num_topics >= 1");
    if (iterations < 1 || passes < 1) throw Error(ErrorCode::ConfigError, "LDA needs iterations, passes >= 1");
    if (!alpha.automatic && !(alpha.value > 0)) throw Error(ErrorCode::ConfigError, "fixed alpha must be > 0");
    if (!eta.automatic && !(eta.value > 0)) throw Error(ErrorCode::ConfigError, "fixed eta must be > 0");
}

void NMFConfig::validate() const {
    if (num_topics < 1) throw Error(ErrorCode::ConfigError, "NMF needs num_topics >= 1");
    if (!(tol > 0)) throw Error(ErrorCode::ConfigError, "NMF tol must be > 0");
    if (max_iters < 1) throw Error(ErrorCode::ConfigError, "NMF needs max_iters >= 1");
}

std::uint64_t TopicModel::seed() const {
    return std::visit([](const auto& c) { return c.seed; }, config);
}

std::optional<std::size_t> TopicModel::doc_index(const std::string& id) const {
    auto it = doc_index_.find(id);
    if (it == doc_index_.end()) return std::nullopt;
    return it->second;
}

void TopicModel::rebuild_index() {
    doc_index_.clear();
    for (std::size_t d = 0; d < doc_ids.size(); ++d) doc_index_.emplace(doc_ids[d], d);
}

TopicModel fit_lda(const features::DocTermMatrix& counts, const LDAConfig& cfg, FitLog* log) {
    cfg.validate();
    if (counts.weighting != features::Weighting::Counts) {
        throw Error(ErrorCode::ConfigError, "LDA needs a counts matrix");
    }
    const std::size_t K = cfg.num_topics;
    const std::size_t W = counts.num_terms;
    if (count_nonempty(counts) < K) {
        throw Error(ErrorCode::DegenerateCorpus, "fewer non-empty documents than topics (" +
                                                     std::to_string(count_nonempty(counts)) + " < " +
                                                     std::to_string(K) + ")");
    }

    GibbsState s;
    s.K = K;
    s.W = W;
    std::vector<std::size_t> train_rows;  // training doc -> matrix row
    for (std::size_t d = 0; d < counts.num_docs; ++d) {
        if (counts.row_empty(d)) continue;
        std::vector<std::uint32_t> words;
        for (auto i = counts.row_ptr[d]; i < counts.row_ptr[d + 1]; ++i) {
            const auto c = static_cast<std::size_t>(std::llround(counts.values[i]));
            words.insert(words.end(), c, counts.cols[i]);
        }
        if (words.empty()) continue;
        train_rows.push_back(d);
        s.words.push_back(std::move(words));
    }
    const std::size_t D = s.words.size();
    if (D < K) throw Error(ErrorCode::DegenerateCorpus, "fewer non-empty documents than topics");

    std::mt19937_64 rng(cfg.seed);
    s.n_dk.assign(D * K, 0);
    s.n_kw.assign(K * W, 0);
    s.n_k.assign(K, 0);
    s.z.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        s.z[d].resize(s.words[d].size());
        for (std::size_t i = 0; i < s.words[d].size(); ++i) {
            const auto k = static_cast<std::uint32_t>(rng() % K);
            s.z[d][i] = k;
            ++s.n_dk[d * K + k];
            ++s.n_kw[k * W + s.words[d][i]];
            ++s.n_k[k];
            ++s.total_tokens;
        }
    }

    std::vector<double> alpha(K, cfg.alpha.automatic ? 1.0 / static_cast<double>(K) : cfg.alpha.value);
    double eta = cfg.eta.automatic ? 1.0 / static_cast<double>(K) : cfg.eta.value;
    std::vector<double> cumulative(K);
    std::vector<double> inv_topic(K);

    for (std::size_t pass = 0; pass < cfg.passes; ++pass) {
        for (std::size_t sweep = 0; sweep < cfg.sweeps_per_pass(); ++sweep) {
            const double w_eta = static_cast<double>(W) * eta;
            for (std::size_t k = 0; k < K; ++k) inv_topic[k] = 1.0 / (static_cast<double>(s.n_k[k]) + w_eta);
            for (std::size_t d = 0; d < D; ++d) {
                auto* ndk = &s.n_dk[d * K];
                for (std::size_t i = 0; i < s.words[d].size(); ++i) {
                    const auto w = s.words[d][i];
                    auto k = s.z[d][i];
                    --ndk[k];
                    --s.n_kw[k * W + w];
                    --s.n_k[k];
                    inv_topic[k] = 1.0 / (static_cast<double>(s.n_k[k]) + w_eta);
                    double acc = 0.0;
                    for (std::size_t t = 0; t < K; ++t) {
                        acc += (ndk[t] + alpha[t]) * (s.n_kw[t * W + w] + eta) * inv_topic[t];
                        cumulative[t] = acc;
                    }
                    k = static_cast<std::uint32_t>(draw(rng, cumulative.data(), K));
                    s.z[d][i] = k;
                    ++ndk[k];
                    ++s.n_kw[k * W + w];
                    ++s.n_k[k];
                    inv_topic[k] = 1.0 / (static_cast<double>(s.n_k[k]) + w_eta);
                }
            }
            if (log) ++log->sweeps;
            if (cfg.check_invariants) {
                check_conservation(s);
                if (log) ++log->invariant_checks;
            }
        }
        // The first pass only burns in the random initialization.
        if (pass > 0 && K > 1) {
            if (cfg.alpha.automatic) update_alpha(s, alpha);
            if (cfg.eta.automatic) update_eta(s, eta);
        }
        if (log) {
            log->alpha_history.push_back(alpha);
            log->eta_history.push_back(eta);
        }
    }

    TopicModel model;
    model.kind = ModelKind::LDA;
    model.num_topics = K;
    model.num_terms = W;
    model.fs_checksum = counts.fs_checksum;
    model.config = cfg;
    model.alpha = alpha;
    model.eta = eta;
    model.doc_ids = counts.doc_ids;
    model.p_feat.assign(K * W, 0.0);
    const double w_eta = static_cast<double>(W) * eta;
    for (std::size_t k = 0; k < K; ++k) {
        const double denom = static_cast<double>(s.n_k[k]) + w_eta;
        for (std::size_t w = 0; w < W; ++w) model.p_feat[k * W + w] = (s.n_kw[k * W + w] + eta) / denom;
    }
    model.empty_topic.assign(K, false);

    const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    model.p_topic.assign(counts.num_docs * K, 1.0 / static_cast<double>(K));
    model.empty_doc.assign(counts.num_docs, true);
    for (std::size_t d = 0; d < D; ++d) {
        const auto row = train_rows[d];
        const double denom = static_cast<double>(s.words[d].size()) + alpha_sum;
        for (std::size_t k = 0; k < K; ++k) model.p_topic[row * K + k] = (s.n_dk[d * K + k] + alpha[k]) / denom;
        model.empty_doc[row] = false;
    }
    model.rebuild_index();
    return model;
}

TopicModel fit_nmf(const features::DocTermMatrix& m, const NMFConfig& cfg, FitLog* log) {
    cfg.validate();
    for (double v : m.values) {
        if (v < 0.0 || !std::isfinite(v)) {
            throw Error(ErrorCode::NonNegativityViolation, "NMF input has a negative or non-finite entry");
        }
    }
    const std::size_t K = cfg.num_topics;
    const std::size_t D = m.num_docs;
    const std::size_t V = m.num_terms;
    std::size_t nonempty = 0;
    for (std::size_t d = 0; d < D; ++d) nonempty += m.row_sum(d) > 0.0 ? 1 : 0;
    if (nonempty < K) {
        throw Error(ErrorCode::DegenerateCorpus, "fewer non-empty documents than topics (" + std::to_string(nonempty) +
                                                     " < " + std::to_string(K) + ")");
    }

    double norm_sq = 0.0;
    double total = 0.0;
    for (double v : m.values) {
        norm_sq += v * v;
        total += v;
    }
    const double scale = std::sqrt(total / (static_cast<double>(D) * static_cast<double>(V)) / static_cast<double>(K));
    std::mt19937_64 rng(cfg.seed);
    std::vector<double> W(D * K);
    std::vector<double> H(K * V);
    for (auto& x : W) x = scale * (0.01 + unit_double(rng()));
    for (auto& x : H) x = scale * (0.01 + unit_double(rng()));

    std::vector<double> wtm(K * V);
    std::vector<double> wtw(K * K);
    std::vector<double> mht(D * K);
    std::vector<double> hht(K * K);
    const double slack = 1e-10 * std::max(1.0, norm_sq);
    double prev = std::numeric_limits<double>::infinity();

    auto gram_w = [&] {
        std::fill(wtw.begin(), wtw.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            const double* w = &W[d * K];
            for (std::size_t a = 0; a < K; ++a) {
                for (std::size_t b = 0; b < K; ++b) wtw[a * K + b] += w[a] * w[b];
            }
        }
    };

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        // H <- H * (W^T M) / (W^T W H)
        gram_w();
        std::fill(wtm.begin(), wtm.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            for (auto i = m.row_ptr[d]; i < m.row_ptr[d + 1]; ++i) {
                const double v = m.values[i];
                if (v == 0.0) continue;
                const auto c = m.cols[i];
                for (std::size_t k = 0; k < K; ++k) wtm[k * V + c] += W[d * K + k] * v;
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t c = 0; c < V; ++c) {
                double den = 0.0;
                for (std::size_t j = 0; j < K; ++j) den += wtw[k * K + j] * H[j * V + c];
                H[k * V + c] *= wtm[k * V + c] / (den + kMuEps);
            }
        }
        // W <- W * (M H^T) / (W H H^T)
        std::fill(hht.begin(), hht.end(), 0.0);
        for (std::size_t a = 0; a < K; ++a) {
            for (std::size_t b = a; b < K; ++b) {
                double acc = 0.0;
                for (std::size_t c = 0; c < V; ++c) acc += H[a * V + c] * H[b * V + c];
                hht[a * K + b] = acc;
                hht[b * K + a] = acc;
            }
        }
        std::fill(mht.begin(), mht.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            for (auto i = m.row_ptr[d]; i < m.row_ptr[d + 1]; ++i) {
                const double v = m.values[i];
                if (v == 0.0) continue;
                const auto c = m.cols[i];
                for (std::size_t k = 0; k < K; ++k) mht[d * K + k] += v * H[k * V + c];
            }
        }
        for (std::size_t d = 0; d < D; ++d) {
            double* w = &W[d * K];
            std::vector<double> den(K, 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t j = 0; j < K; ++j) den[k] += w[j] * hht[j * K + k];
            }
            for (std::size_t k = 0; k < K; ++k) w[k] *= mht[d * K + k] / (den[k] + kMuEps);
        }

        // ||M - WH||^2 = ||M||^2 - 2 <W, M H^T> + <W^T W, H H^T>
        gram_w();
        double cross = 0.0;
        for (std::size_t i = 0; i < D * K; ++i) cross += W[i] * mht[i];
        double quad = 0.0;
        for (std::size_t i = 0; i < K * K; ++i) quad += wtw[i] * hht[i];
        const double obj = std::max(0.0, norm_sq - 2.0 * cross + quad);
        if (log) {
            log->objective.push_back(obj);
            if (obj > prev + slack) ++log->monotonicity_violations;
        }
        const bool converged = std::isfinite(prev) && (prev - obj) <= cfg.tol * std::max(prev, 1e-300);
        prev = obj;
        if (converged) break;
    }

    for (double x : W) {
        if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::NonNegativityViolation, "NMF factor W went negative");
    }
    for (double x : H) {
        if (x < 0.0 || !std::isfinite(x)) throw Error(ErrorCode::NonNegativityViolation, "NMF factor H went negative");
    }

    TopicModel model;
    model.kind = ModelKind::NMF;
    model.num_topics = K;
    model.num_terms = V;
    model.fs_checksum = m.fs_checksum;
    model.config = cfg;
    model.doc_ids = m.doc_ids;
    model.idf = m.idf;
    model.topic_scale.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t c = 0; c < V; ++c) model.topic_scale[k] += H[k * V + c];
    }
    model.p_feat = std::move(H);
    check_rows_simplex(model.p_feat, V, model.empty_topic);
    model.p_topic = std::move(W);
    check_rows_simplex(model.p_topic, K, model.empty_doc);
    model.rebuild_index();
    return model;
}

namespace {

// Gram matrix H H^T of the unnormalized NMF factor, shared by every row.
std::vector<double> nmf_gram(const TopicModel& model) {
    const auto K = model.num_topics;
    const auto V = model.num_terms;
    std::vector<double> hht(K * K, 0.0);
    for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = a; b < K; ++b) {
            double acc = 0.0;
            for (std::size_t c = 0; c < V; ++c) acc += model.feat(a, c) * model.feat(b, c);
            hht[a * K + b] = hht[b * K + a] = acc * model.topic_scale[a] * model.topic_scale[b];
        }
    }
    return hht;
}

// Non-negative least squares of the weighted row against H.
TopicDistribution infer_nmf(const TopicModel& model, const features::TermRow& row, const std::vector<double>& hht) {
    const auto K = model.num_topics;
    const auto V = model.num_terms;
    TopicDistribution out;
    double mass = 0.0;
    for (std::size_t i = 0; i < row.cols.size(); ++i) {
        if (row.cols[i] >= V) throw Error(ErrorCode::FeatureSpaceMismatch, "term index out of range for the model");
        mass += row.counts[i];
    }
    if (row.cols.empty() || !(mass > 0.0)) {
        out.probs.assign(K, 1.0 / static_cast<double>(K));
        out.degenerate = true;
        return out;
    }
    const auto& cfg = std::get<NMFConfig>(model.config);
    std::vector<double> xht(K, 0.0);
    for (std::size_t i = 0; i < row.cols.size(); ++i) {
        const double x = row.counts[i] * (model.idf.empty() ? 1.0 : model.idf[row.cols[i]]);
        for (std::size_t k = 0; k < K; ++k) xht[k] += x * model.topic_scale[k] * model.feat(k, row.cols[i]);
    }
    std::vector<double> w(K, 1.0 / static_cast<double>(K));
    for (std::size_t it = 0; it < cfg.infer_iters; ++it) {
        for (std::size_t k = 0; k < K; ++k) {
            double den = 0.0;
            for (std::size_t j = 0; j < K; ++j) den += w[j] * hht[j * K + k];
            w[k] *= xht[k] / (den + kMuEps);
        }
    }
    const double s = std::accumulate(w.begin(), w.end(), 0.0);
    if (!(s > 0.0)) {
        out.probs.assign(K, 1.0 / static_cast<double>(K));
        out.degenerate = true;
    } else {
        out.probs = w;
        for (auto& p : out.probs) p /= s;
    }
    return out;
}

}  // namespace

TopicDistribution infer_topics(const TopicModel& model, const std::string& doc_id) {
    const auto idx = model.doc_index(doc_id);
    if (!idx) throw Error(ErrorCode::FeatureSpaceMismatch, "document '" + doc_id + "' is not part of the model");
    const auto K = model.num_topics;
    TopicDistribution out;
    out.probs.assign(model.p_topic.begin() + static_cast<std::ptrdiff_t>(*idx * K),
                     model.p_topic.begin() + static_cast<std::ptrdiff_t>((*idx + 1) * K));
    out.degenerate = model.empty_doc[*idx];
    return out;
}

TopicDistribution infer_topics(const TopicModel& model, const features::TermRow& row, std::uint64_t fs_checksum) {
    if (fs_checksum != model.fs_checksum) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "row was built with a different feature space");
    }
    const auto K = model.num_topics;
    const auto V = model.num_terms;
    for (auto c : row.cols) {
        if (c >= V) throw Error(ErrorCode::FeatureSpaceMismatch, "term index out of range for the model");
    }
    TopicDistribution out;
    double mass = 0.0;
    for (double v : row.counts) mass += v;
    if (row.cols.empty() || !(mass > 0.0)) {
        out.probs.assign(K, 1.0 / static_cast<double>(K));
        out.degenerate = true;
        return out;
    }

    if (model.kind == ModelKind::LDA) {
        const auto& cfg = std::get<LDAConfig>(model.config);
        std::vector<std::uint32_t> words;
        std::uint64_t h = splitmix64(cfg.seed);
        for (std::size_t i = 0; i < row.cols.size(); ++i) {
            const auto c = static_cast<std::size_t>(std::llround(row.counts[i]));
            words.insert(words.end(), c, row.cols[i]);
            h = splitmix64(h ^ (static_cast<std::uint64_t>(row.cols[i]) << 20 ^ c));
        }
        std::mt19937_64 rng(h);
        std::vector<std::uint32_t> z(words.size());
        std::vector<double> ndk(K, 0.0);
        for (std::size_t i = 0; i < words.size(); ++i) {
            z[i] = static_cast<std::uint32_t>(rng() % K);
            ndk[z[i]] += 1.0;
        }
        const double alpha_sum = std::accumulate(model.alpha.begin(), model.alpha.end(), 0.0);
        const double denom = static_cast<double>(words.size()) + alpha_sum;
        std::vector<double> cumulative(K);
        out.probs.assign(K, 0.0);
        const std::size_t total = cfg.burn_in + std::max<std::size_t>(1, cfg.infer_samples);
        for (std::size_t sweep = 0; sweep < total; ++sweep) {
            for (std::size_t i = 0; i < words.size(); ++i) {
                ndk[z[i]] -= 1.0;
                double acc = 0.0;
                for (std::size_t t = 0; t < K; ++t) {
                    acc += (ndk[t] + model.alpha[t]) * model.feat(t, words[i]);
                    cumulative[t] = acc;
                }
                z[i] = static_cast<std::uint32_t>(draw(rng, cumulative.data(), K));
                ndk[z[i]] += 1.0;
            }
            if (sweep >= cfg.burn_in) {
                for (std::size_t t = 0; t < K; ++t) out.probs[t] += (ndk[t] + model.alpha[t]) / denom;
            }
        }
        const double n = static_cast<double>(total - cfg.burn_in);
        for (auto& p : out.probs) p /= n;
        return out;
    }

    return infer_nmf(model, row, nmf_gram(model));
}

std::vector<TopicDistribution> infer_topics(const TopicModel& model, std::span<const features::TermRow> rows,
                                            std::uint64_t fs_checksum) {
    std::vector<TopicDistribution> out;
    out.reserve(rows.size());
    if (model.kind == ModelKind::LDA) {
        for (const auto& row : rows) out.push_back(infer_topics(model, row, fs_checksum));
        return out;
    }
    if (fs_checksum != model.fs_checksum) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "rows were built with a different feature space");
    }
    const auto gram = nmf_gram(model);
    for (const auto& row : rows) out.push_back(infer_nmf(model, row, gram));
    return out;
}

std::vector<RankedTerm> top_terms(const TopicModel& model, std::size_t topic, std::size_t n) {
    std::vector<std::size_t> idx(model.num_terms);
    std::iota(idx.begin(), idx.end(), 0);
    n = std::min(n, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double pa = model.feat(topic, a);
                          const double pb = model.feat(topic, b);
                          return pa != pb ? pa > pb : a < b;
                      });
    std::vector<RankedTerm> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({idx[i], model.feat(topic, idx[i])});
    return out;
}

void write_topics_csv(const std::string& path, const TopicModel& model, const features::FeatureSpace& fs,
                      std::size_t n) {
    if (fs.checksum() != model.fs_checksum) {
        throw Error(ErrorCode::FeatureSpaceMismatch, "feature space does not belong to the model");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    csv::write_row(out, {"topic_id", "rank", "term", "probability"});
    char buf[32];
    for (std::size_t t = 0; t < model.num_topics; ++t) {
        const auto top = top_terms(model, t, n);
        for (std::size_t r = 0; r < top.size(); ++r) {
            std::snprintf(buf, sizeof buf, "%.6g", top[r].probability);
            csv::write_row(out, {std::to_string(t), std::to_string(r + 1), fs.terms()[top[r].term], buf});
        }
    }
}

void TopicModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    binio::put_magic(out, kModelMagic);
    binio::put<std::uint32_t>(out, kModelVersion);
    binio::put<std::uint8_t>(out, kind == ModelKind::LDA ? 0 : 1);
    binio::put<std::uint64_t>(out, num_topics);
    binio::put<std::uint64_t>(out, num_terms);
    binio::put<std::uint64_t>(out, doc_ids.size());
    binio::put<std::uint64_t>(out, seed());
    binio::put<std::uint64_t>(out, fs_checksum);
    if (kind == ModelKind::LDA) {
        const auto& c = std::get<LDAConfig>(config);
        binio::put<std::uint64_t>(out, c.iterations);
        binio::put<std::uint64_t>(out, c.passes);
        binio::put<std::uint64_t>(out, c.burn_in);
        binio::put<std::uint64_t>(out, c.infer_samples);
        binio::put<std::uint8_t>(out, c.alpha.automatic ? 1 : 0);
        binio::put<double>(out, c.alpha.value);
        binio::put<std::uint8_t>(out, c.eta.automatic ? 1 : 0);
        binio::put<double>(out, c.eta.value);
    } else {
        const auto& c = std::get<NMFConfig>(config);
        binio::put<std::uint64_t>(out, c.max_iters);
        binio::put<double>(out, c.tol);
        binio::put<std::uint64_t>(out, c.infer_iters);
    }
    for (const auto& id : doc_ids) binio::put_string(out, id);
    for (bool b : empty_doc) binio::put<std::uint8_t>(out, b ? 1 : 0);
    for (bool b : empty_topic) binio::put<std::uint8_t>(out, b ? 1 : 0);
    auto put_vec = [&](const std::vector<double>& v) {
        binio::put<std::uint64_t>(out, v.size());
        for (double x : v) binio::put<double>(out, x);
    };
    put_vec(alpha);
    binio::put<double>(out, eta);
    put_vec(topic_scale);
    put_vec(idf);
    for (double x : p_feat) binio::put<double>(out, x);
    for (double x : p_topic) binio::put<double>(out, x);
}

TopicModel TopicModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    binio::expect_magic(in, kModelMagic, "topic model");
    const auto version = binio::get<std::uint32_t>(in);
    if (version != kModelVersion) {
        throw Error(ErrorCode::ParseError, "unsupported model version " + std::to_string(version));
    }
    TopicModel m;
    m.kind = binio::get<std::uint8_t>(in) == 0 ? ModelKind::LDA : ModelKind::NMF;
    m.num_topics = binio::get<std::uint64_t>(in);
    m.num_terms = binio::get<std::uint64_t>(in);
    const auto num_docs = binio::get<std::uint64_t>(in);
    const auto seed = binio::get<std::uint64_t>(in);
    m.fs_checksum = binio::get<std::uint64_t>(in);
    if (m.kind == ModelKind::LDA) {
        LDAConfig c;
        c.num_topics = m.num_topics;
        c.seed = seed;
        c.iterations = binio::get<std::uint64_t>(in);
        c.passes = binio::get<std::uint64_t>(in);
        c.burn_in = binio::get<std::uint64_t>(in);
        c.infer_samples = binio::get<std::uint64_t>(in);
        c.alpha.automatic = binio::get<std::uint8_t>(in) != 0;
        c.alpha.value = binio::get<double>(in);
        c.eta.automatic = binio::get<std::uint8_t>(in) != 0;
        c.eta.value = binio::get<double>(in);
        m.config = c;
    } else {
        NMFConfig c;
        c.num_topics = m.num_topics;
        c.seed = seed;
        c.max_iters = binio::get<std::uint64_t>(in);
        c.tol = binio::get<double>(in);
        c.infer_iters = binio::get<std::uint64_t>(in);
        m.config = c;
    }
    for (std::uint64_t d = 0; d < num_docs; ++d) m.doc_ids.push_back(binio::get_string(in));
    m.empty_doc.resize(num_docs);
    for (std::uint64_t d = 0; d < num_docs; ++d) m.empty_doc[d] = binio::get<std::uint8_t>(in) != 0;
    m.empty_topic.resize(m.num_topics);
    for (std::size_t k = 0; k < m.num_topics; ++k) m.empty_topic[k] = binio::get<std::uint8_t>(in) != 0;
    auto get_vec = [&] {
        std::vector<double> v(binio::get<std::uint64_t>(in));
        for (auto& x : v) x = binio::get<double>(in);
        return v;
    };
    m.alpha = get_vec();
    m.eta = binio::get<double>(in);
    m.topic_scale = get_vec();
    m.idf = get_vec();
    m.p_feat.resize(m.num_topics * m.num_terms);
    for (auto& x : m.p_feat) x = binio::get<double>(in);
    m.p_topic.resize(num_docs * m.num_topics);
    for (auto& x : m.p_topic) x = binio::get<double>(in);
    m.rebuild_index();
    return m;
}

}  // namespace hazardtm::topicmodel
