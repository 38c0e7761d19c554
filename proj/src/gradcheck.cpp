#include "emoda/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "emoda/fdcheck.hpp"

namespace emoda::gradcheck {

namespace {

std::vector<data::LabeledExample> random_batch(Rng& rng, const GradcheckOptions& opt,
                                               data::Domain domain) {
    std::vector<data::LabeledExample> batch;
    for (int b = 0; b < opt.batch; ++b) {
        data::LabeledExample ex;
        ex.id = (domain == data::Domain::source ? "s" : "t") + std::to_string(b);
        ex.domain = domain;
        auto len = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.steps)));
        ex.seq.ids.assign(static_cast<std::size_t>(opt.steps), text::Vocabulary::kPadId);
        for (int t = 0; t < len; ++t) {
            ex.seq.ids[static_cast<std::size_t>(t)] =
                2 + static_cast<std::int32_t>(rng.below(opt.vocab - 2));
        }
        ex.seq.true_length = len;
        if (domain == data::Domain::source) {
            ex.set_veracity(rng.next_double() < 0.5 ? 1 : 0);
        }
        ex.emotion = emotion::EmotionLabel{static_cast<int>(rng.below(8)),
                                           emotion::Taxonomy::plutchik8};
        batch.push_back(std::move(ex));
    }
    return batch;
}

struct LossValues {
    double fnd = 0, emo = 0, adv = 0, total = 0;
};

} // namespace

// The gradient reversal layer makes the analytic extractor gradient of the
// adversarial term -lambda times the true derivative that finite
// differences measure (forward is the identity, so FD cannot see the
// reversal). The oracle therefore checks, per parameter group:
//   l_fnd, l_emo:  analytic == fd                          (all groups)
//   l_adv:         analytic == fd          (theta_d; zero for theta_f/e)
//                  analytic == -lambda*fd  (theta_l, embedding)
//   l_total:       analytic == (1-a-b)*fd_fnd + b*fd_emo + a*s*fd_adv,
//                  s = -lambda on the extractor group, 1 elsewhere.
GradcheckOutcome run_gradcheck(const GradcheckOptions& options) {
    auto t0 = std::chrono::steady_clock::now();
    GradcheckOutcome outcome;
    outcome.passed = true;

    Rng rng(options.seed);

    std::vector<std::vector<std::string>> corpus;
    for (std::size_t i = 2; i < options.vocab; ++i) {
        corpus.push_back({"w" + std::to_string(i)});
    }
    auto vocab = text::Vocabulary::build(corpus, 1);
    auto table = text::random_embeddings(vocab, options.dims.embed_dim,
                                         derive_seed(options.seed, "gradcheck.embeddings"));

    const double lambda = 0.8, alpha = 0.25, beta = 0.25;

    for (int trial = 0; trial < options.trials; ++trial) {
        auto m = model::create_model<double>(model::ModelVariant::da_mtl_p, table,
                                             derive_seed(options.seed, "gradcheck.model") + trial,
                                             options.dims, /*embedding_trainable=*/true);
        auto source = random_batch(rng, options, data::Domain::source);
        auto target = random_batch(rng, options, data::Domain::target);
        std::vector<const data::LabeledExample*> sp, tp;
        for (auto& e : source) sp.push_back(&e);
        for (auto& e : target) tp.push_back(&e);

        auto params = m.named_params(true);

        // sample coordinates once per tensor, shared by all four losses
        std::vector<std::vector<std::size_t>> coords(params.size());
        {
            Rng crng(derive_seed(options.seed, "gradcheck.coords") + trial);
            for (std::size_t p = 0; p < params.size(); ++p) {
                std::size_t n = params[p].tensor.size();
                std::size_t want = options.coords_per_tensor == 0
                                       ? n
                                       : std::min<std::size_t>(options.coords_per_tensor, n);
                for (std::size_t i = 0; i < want; ++i) {
                    coords[p].push_back(static_cast<std::size_t>(crng.below(n)));
                }
                std::sort(coords[p].begin(), coords[p].end());
                coords[p].erase(std::unique(coords[p].begin(), coords[p].end()),
                                coords[p].end());
            }
        }

        // analytic gradients at the sampled coordinates, one backward per loss
        auto snapshot = [&](const std::function<ad::Tensor<double>(ad::Tape<double>&)>& fwd) {
            for (auto& np : params) np.tensor.zero_grad();
            ad::Tape<double> tape;
            tape.backward(fwd(tape));
            std::vector<std::vector<double>> grads(params.size());
            for (std::size_t p = 0; p < params.size(); ++p) {
                ad::Tensor<double> t = params[p].tensor;
                t.ensure_grad();
                for (std::size_t idx : coords[p]) grads[p].push_back(t.grad()[idx]);
            }
            return grads;
        };
        auto g_fnd = snapshot([&](ad::Tape<double>& t) { return model::loss_fnd(t, m, sp); });
        auto g_emo =
            snapshot([&](ad::Tape<double>& t) { return model::loss_emo(t, m, sp, tp); });
        auto g_adv = snapshot(
            [&](ad::Tape<double>& t) { return model::loss_adv(t, m, sp, tp, lambda); });
        auto g_total = snapshot([&](ad::Tape<double>& t) {
            return model::forward_losses(t, m, sp, tp, alpha, beta, lambda, nullptr);
        });

        // one forward evaluates all four losses at once
        auto eval = [&]() {
            ad::Tape<double> tape;
            tape.set_recording(false);
            model::LossBreakdown b;
            model::forward_losses<double>(tape, m, sp, tp, alpha, beta, lambda, &b);
            return LossValues{b.l_fnd, b.l_emo, b.l_adv, b.l_total};
        };

        for (std::size_t p = 0; p < params.size(); ++p) {
            ad::Tensor<double> tensor = params[p].tensor;
            const bool extractor = params[p].name == "embedding" ||
                                   params[p].name.rfind("lstm.", 0) == 0;
            const double adv_scale = extractor ? -lambda : 1.0;

            for (std::size_t c = 0; c < coords[p].size(); ++c) {
                std::size_t idx = coords[p][c];
                double saved = tensor.data()[idx];
                tensor.data()[idx] = saved + options.h;
                LossValues plus = eval();
                tensor.data()[idx] = saved - options.h;
                LossValues minus = eval();
                tensor.data()[idx] = saved;

                double fd_fnd = (plus.fnd - minus.fnd) / (2 * options.h);
                double fd_emo = (plus.emo - minus.emo) / (2 * options.h);
                double fd_adv = (plus.adv - minus.adv) / (2 * options.h);

                struct Check {
                    const char* loss;
                    double analytic;
                    double expected;
                };
                const Check checks[] = {
                    {"l_fnd", g_fnd[p][c], fd_fnd},
                    {"l_emo", g_emo[p][c], fd_emo},
                    {"l_adv", g_adv[p][c], adv_scale * fd_adv},
                    {"l_total", g_total[p][c],
                     (1.0 - alpha - beta) * fd_fnd + beta * fd_emo +
                         alpha * adv_scale * fd_adv},
                };
                for (const auto& check : checks) {
                    double re = ad::fd_rel_err(check.analytic, check.expected);
                    outcome.coordinates_checked += 1;
                    outcome.max_rel_err = std::max(outcome.max_rel_err, re);
                    if (re >= options.tol) {
                        outcome.passed = false;
                        std::ostringstream os;
                        os << "trial " << trial << " " << check.loss << " " << params[p].name
                           << "[" << idx << "]: analytic " << check.analytic
                           << " vs expected " << check.expected << " (rel " << re << ")";
                        outcome.failures.push_back(os.str());
                    }
                }
            }
        }
    }

    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return outcome;
}

} // namespace emoda::gradcheck
