#include "doctest.h"

#include <cmath>
#include <set>

#include "dak/dakucb.hpp"
#include "dak/mixture.hpp"
#include "dak/qp.hpp"
#include "dak/sup_dakucb.hpp"
#include "oracles.hpp"

using namespace dak;

namespace {

JointKernelSpec joint(double st, double sx) {
    JointKernelSpec j;
    j.text_kernel = KernelSpec::gaussian(st);
    j.data_kernel = KernelSpec::gaussian(sx);
    return j;
}

PolicyConfig base_config(double lambda) {
    PolicyConfig c;
    c.lambda = lambda;
    c.beta_s = 1.0;
    c.beta_d = 1.0;
    c.kernels = joint(0.5, 1.0);
    return c;
}

SyntheticLayout diverse_layout() {
    SyntheticLayout L;
    L.clusters = 2;
    L.seed = 7;
    ArmTemplate collapsed;
    collapsed.modes_per_cluster = 8;
    collapsed.anchor_group = 0;
    ArmTemplate diverse = collapsed;
    diverse.selection = ModeSelection::uniform_over_modes;
    L.arms = {collapsed, diverse};
    return L;
}

SyntheticLayout collapsed_trio() {
    SyntheticLayout L;
    L.clusters = 1;
    L.seed = 13;
    L.cluster_spread = 0.05;
    ArmTemplate a;
    a.selection = ModeSelection::collapsed;
    a.style_radius = 1.5;
    a.noise_scale = 0.01;
    L.arms = {a, a, a};
    return L;
}

// Scales the wrapped environment's fidelity labels.
class ScaledEnv final : public Environment {
public:
    ScaledEnv(SyntheticEnv inner, double scale) : inner_(std::move(inner)), scale_(scale) {}
    std::size_t num_arms() const override { return inner_.num_arms(); }
    std::size_t num_clusters() const override { return inner_.num_clusters(); }
    Prompt sample_prompt(Rng& rng) override { return inner_.sample_prompt(rng); }
    Vector generate(std::size_t arm, const Prompt& p, Rng& rng) override { return inner_.generate(arm, p, rng); }
    double fidelity(const Prompt& p, std::size_t arm, const Vector& x) const override {
        return scale_ * inner_.fidelity(p, arm, x);
    }

private:
    SyntheticEnv inner_;
    double scale_;
};

}  // namespace

TEST_CASE("dakucb_score") {
    PolicyConfig c = base_config(0.0);
    CHECK(dakucb_score(0.5, 0.1, 0.3, 0.2, c) == doctest::Approx(0.6));
    c.lambda = 1.0;
    CHECK(dakucb_score(0.5, 0.1, 0.3, 0.2, c) == doctest::Approx(0.5));
    const std::vector<double> tied{1.0, 3.0, 3.0};
    CHECK(argmax_lowest(tied) == 1);
}

TEST_CASE("config validation") {
    PolicyConfig c = base_config(1.0);
    c.validate();
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = base_config(1.0);
    c.panel_rate = 1.5;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = base_config(1.0);
    c.diversity = DiversityPrimitive::neg_jkd;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("first round picks arm 0 on ties") {
    auto env = build_synthetic_env(diverse_layout());
    DakUcb p(2, base_config(1.0));
    Rng rng(1);
    const auto rec = p.step(env, rng);
    CHECK(rec.arm == 0);
    CHECK(rec.ucb[0] == rec.ucb[1]);
    CHECK(rec.y_div == 0.0);
    CHECK(rec.weights == std::vector<double>{1.0, 0.0});
}

TEST_CASE("scripted archives steer toward the unsaturated arm") {
    PolicyConfig c = base_config(1.0);
    DakUcb p(2, c);
    Rng rng(2);
    const Vector t = Vector::Zero(2);
    const Vector same = Vector::Constant(3, 1.0);
    for (int i = 0; i < 60; ++i) {
        // arm 0 outputs are far apart (labels 0), arm 1 repeats one output (labels 1 after the first)
        p.observe(0, t, Vector::Constant(3, 100.0 * (i + 1)), 0.7);
        p.observe(1, t, same, 0.7);
    }
    CHECK(p.archive().live(0).size() == 60);
    const auto scores = p.scores(t);
    CHECK(scores[0] > scores[1]);
    CHECK(argmax_lowest(scores) == 0);
    CHECK(label_ijrke(t, same, p.archive().live(1), c.kernels) == doctest::Approx(1.0));
}

TEST_CASE("lambda zero reproduces the fidelity-only policy") {
    const auto layout = diverse_layout();
    auto env_a = build_synthetic_env(layout);
    auto env_b = build_synthetic_env(layout);
    DakUcb dak(2, base_config(0.0));
    PakUcb pak(2, base_config(0.0));
    Rng ra(99), rb(99);
    for (int i = 0; i < 300; ++i) {
        const auto a = dak.step(env_a, ra);
        const auto b = pak.step(env_b, rb);
        REQUIRE(a.arm == b.arm);
        CHECK(a.ucb == b.ucb);
        CHECK(a.y_fid == b.y_fid);
    }
}

TEST_CASE("scaling fidelity labels and beta_s leaves choices unchanged") {
    for (double scale : {4.0, 0.37}) {
        ScaledEnv plain(build_synthetic_env(diverse_layout()), 1.0);
        ScaledEnv scaled(build_synthetic_env(diverse_layout()), scale);
        PolicyConfig c = base_config(0.0);
        PolicyConfig cs = c;
        cs.beta_s *= scale;
        DakUcb a(2, c), b(2, cs);
        Rng ra(5), rb(5);
        for (int i = 0; i < 200; ++i) CHECK(a.step(plain, ra).arm == b.step(scaled, rb).arm);
    }
}

TEST_CASE("psd projection") {
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -1.0;
    const Matrix pd = psd_project(d);
    CHECK(pd(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(pd(1, 1)) <= 1e-15);
    CHECK(std::abs(pd(0, 1)) <= 1e-15);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Matrix b(3, 3);
        for (Eigen::Index i = 0; i < 9; ++i) b.data()[i] = std::normal_distribution<double>()(rng);
        const Matrix psd = b * b.transpose();
        CHECK((psd_project(psd) - psd).cwiseAbs().maxCoeff() <= 1e-10);

        const Matrix m = 0.5 * (b + b.transpose());
        const Matrix x = psd_project(m);
        CHECK((psd_project(x) - x).cwiseAbs().maxCoeff() <= 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix> ex(x), er(x - m);
        CHECK(ex.eigenvalues().minCoeff() >= -1e-10);
        // Optimality conditions of the nearest PSD matrix
        CHECK(er.eigenvalues().minCoeff() >= -1e-8);
        CHECK(std::abs((x.cwiseProduct(x - m)).sum()) <= 1e-8);
        for (int k = 0; k < 200; ++k) {
            Matrix c(3, 3);
            for (Eigen::Index i = 0; i < 9; ++i) c.data()[i] = std::normal_distribution<double>()(rng);
            const Matrix competitor = x + 0.1 * c * c.transpose();
            CHECK((competitor - m).norm() >= (x - m).norm() - 1e-8);
        }
    }
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(psd_project(bad), std::invalid_argument);
    CHECK_THROWS_AS(psd_project(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("simplex qp") {
    Vector s(3);
    s << 0.2, 0.9, 0.9;
    auto r = simplex_qp(s, Matrix::Identity(3, 3), 0.0);
    CHECK(r.weights[1] == 1.0);
    CHECK(r.weights[0] == 0.0);

    Vector z = Vector::Zero(2);
    r = simplex_qp(z, Matrix::Identity(2, 2), 1.0);
    CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-8));

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        Vector sv(3);
        for (int i = 0; i < 3; ++i) sv(i) = u(rng);
        Matrix b(3, 3);
        for (Eigen::Index i = 0; i < 9; ++i) b.data()[i] = u(rng) - 0.3;
        const Matrix m = psd_project(b * b.transpose());
        const double lambda = 0.1 + 3.0 * u(rng);
        const auto res = simplex_qp(sv, m, lambda, 1e-12, 10000, true);
        CHECK(res.weights.valid());
        for (std::size_t k = 1; k < res.objective_trace.size(); ++k)
            CHECK(res.objective_trace[k] >= res.objective_trace[k - 1] - 1e-15);
        const double obj = qp_objective(sv, m, lambda, res.weights.values);
        for (int g = 0; g < 3; ++g) CHECK(obj >= qp_objective(sv, m, lambda, Vector::Unit(3, g)) - 1e-6);
        std::vector<double> ss(sv.data(), sv.data() + 3);
        std::vector<std::vector<double>> mm(3, std::vector<double>(3));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) mm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
        CHECK(obj >= static_cast<double>(oracle::grid_max3(ss, mm, lambda)) - 1e-4);
    }
    Matrix neg = -Matrix::Identity(2, 2);
    CHECK_THROWS_AS(simplex_qp(z, neg, 1.0), std::invalid_argument);
}

TEST_CASE("simplex projection") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector v = oracle::gaussian_vec(5, rng, 2.0);
        const Vector p = project_to_simplex(v);
        CHECK(p.minCoeff() >= 0.0);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
        // Moreau condition: <v - p, q - p> <= 0 for vertices q
        for (int g = 0; g < 5; ++g) CHECK((v - p).dot(Vector::Unit(5, g) - p) <= 1e-12);
    }
}

TEST_CASE("pair labels") {
    const auto j = joint(0.7, 1.0);
    std::mt19937_64 rng(6);
    const Vector t = oracle::gaussian_vec(2, rng), x = oracle::gaussian_vec(3, rng);
    std::map<std::size_t, Vector> outs{{0, x}, {1, x}};
    std::vector<PairedCorpus> archive(2);
    CHECK(pair_label(0, 1, t, outs, archive, j) == 0.0);
    archive[0].add(t, x);
    CHECK(pair_label(0, 0, t, outs, archive, j) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pair_label(0, 2, t, outs, archive, j), std::invalid_argument);
    std::map<std::size_t, Vector> only0{{0, x}};
    CHECK_THROWS_AS(pair_label(0, 1, t, only0, archive, j), std::invalid_argument);

    // Closed panel corpus: labels averaged over its prompts give the double-sum estimate of M_{g g'}.
    const std::size_t n = 12;
    std::vector<Vector> prompts;
    std::vector<std::vector<Vector>> outputs(3);
    std::vector<PairedCorpus> panel(3);
    for (std::size_t i = 0; i < n; ++i) {
        prompts.push_back(oracle::gaussian_vec(2, rng));
        for (std::size_t g = 0; g < 3; ++g) {
            outputs[g].push_back(oracle::gaussian_vec(3, rng));
            panel[g].add(prompts[i], outputs[g][i]);
        }
    }
    const oracle::Kern kt{oracle::Family::gaussian, 0.7}, kx{oracle::Family::gaussian, 1.0};
    for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t h = 0; h < 3; ++h) {
            double mean = 0.0;
            long double want = 0;
            for (std::size_t i = 0; i < n; ++i) {
                std::map<std::size_t, Vector> o{{0, outputs[0][i]}, {1, outputs[1][i]}, {2, outputs[2][i]}};
                mean += pair_label(g, h, prompts[i], o, panel, j) / static_cast<double>(n);
                for (std::size_t k = 0; k < n; ++k) {
                    const long double a = kt(prompts[i], prompts[k]), b = kx(outputs[g][i], outputs[h][k]);
                    want += a * a * b * b;
                }
            }
            want /= static_cast<long double>(n * n);
            CHECK(std::abs(mean - static_cast<double>(want)) <= 1e-10);
        }
}

TEST_CASE("mixture with lambda zero and no panels plays the fidelity argmax") {
    auto env = build_synthetic_env(collapsed_trio());
    PolicyConfig c = base_config(0.0);
    c.panel_rate = 0.0;
    MixtureDakUcb m(3, c);
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto rec = m.step(env, rng);
        const std::size_t best = argmax_lowest(rec.ucb);
        CHECK(rec.weights[best] == 1.0);
        CHECK(rec.arm == best);
        CHECK_FALSE(rec.panel);
    }
    CHECK(m.panel_rounds() == 0);
}

TEST_CASE("symmetric collapsed trio converges to the uniform mixture") {
    auto env = build_synthetic_env(collapsed_trio());
    PolicyConfig c = base_config(5.0);
    c.panel_rate = 0.3;
    MixtureDakUcb m(3, c);
    Rng rng(8);
    std::vector<double> avg(3, 0.0);
    const int T = 400, tail = 100;
    for (int i = 0; i < T; ++i) {
        const auto rec = m.step(env, rng);
        double total = 0.0;
        for (double w : rec.weights) total += w;
        CHECK(std::abs(total - 1.0) <= 1e-9);
        if (i >= T - tail)
            for (std::size_t g = 0; g < 3; ++g) avg[g] += rec.weights[g] / tail;
    }
    for (double a : avg) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(0.3));
    CHECK(m.panel_rounds() > 0);
}

TEST_CASE("mixture selection frequencies follow the mixture weights") {
    std::vector<double> gap(3, 0.0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto env = build_synthetic_env(collapsed_trio());
        PolicyConfig c = base_config(2.0);
        MixtureDakUcb m(3, c);
        Rng rng(100 + seed);
        for (int i = 0; i < 500; ++i) {
            const auto rec = m.step(env, rng);
            for (std::size_t g = 0; g < 3; ++g)
                gap[g] += ((rec.arm == g ? 1.0 : 0.0) - rec.weights[g]) / (500.0 * 10.0);
        }
    }
    for (double d : gap) CHECK(std::abs(d) <= 0.05);
}

TEST_CASE("mixture proxy error stays within epsilon") {
    std::mt19937_64 rng(9);
    const auto j = joint(0.6, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const double eps = trial % 2 ? 0.05 : 0.2;
        MixtureInstance inst;
        const int groups = 3;
        std::vector<Vector> centers;
        std::vector<Vector> raw;
        for (int c = 0; c < groups; ++c) {
            centers.push_back(oracle::gaussian_vec(2, rng, 1.5));
            Vector a(3);
            for (int g = 0; g < 3; ++g) a(g) = u(rng);
            raw.push_back(a / a.sum());
        }
        std::vector<int> group;
        for (int i = 0; i < 24; ++i) {
            const int c = i % groups;
            group.push_back(c);
            inst.prompts.push_back(centers[static_cast<std::size_t>(c)] + oracle::gaussian_vec(2, rng, 0.1));
            inst.reference.push_back(oracle::gaussian_vec(3, rng));
        }
        inst.outputs.resize(3);
        for (auto& arm : inst.outputs)
            for (int i = 0; i < 24; ++i) arm.push_back(oracle::gaussian_vec(3, rng));
        for (int i = 0; i < 24; ++i) inst.weights.push_back(raw[static_cast<std::size_t>(group[static_cast<std::size_t>(i)])]);
        const double level = kernel_lipschitz_level(inst, j.text_kernel);
        if (level > eps) {
            Vector mean = Vector::Zero(3);
            for (const auto& a : raw) mean += a / groups;
            for (auto& w : inst.weights) w = mean + (eps / level) * (w - mean);
        }
        CHECK(kernel_lipschitz_level(inst, j.text_kernel) <= eps + 1e-12);
        CHECK(std::abs(mixture_ijrke_exact(inst, j) - mixture_ijrke_proxy(inst, j)) <= eps);
        CHECK(std::abs(mixture_jkd_exact(inst, j) - mixture_jkd_proxy(inst, j)) <= eps);
    }
}

TEST_CASE("constant mixtures make the proxy exact") {
    std::mt19937_64 rng(10);
    const auto j = joint(0.8, 1.0);
    MixtureInstance inst;
    Vector a(2);
    a << 0.3, 0.7;
    for (int i = 0; i < 10; ++i) {
        inst.prompts.push_back(oracle::gaussian_vec(2, rng));
        inst.reference.push_back(oracle::gaussian_vec(2, rng));
        inst.weights.push_back(a);
    }
    inst.outputs.resize(2);
    for (auto& arm : inst.outputs)
        for (int i = 0; i < 10; ++i) arm.push_back(oracle::gaussian_vec(2, rng));
    CHECK(mixture_ijrke_exact(inst, j) == doctest::Approx(mixture_ijrke_proxy(inst, j)).epsilon(1e-12));
    CHECK(mixture_jkd_exact(inst, j) == doctest::Approx(mixture_jkd_proxy(inst, j)).epsilon(1e-12));
    CHECK(kernel_lipschitz_level(inst, j.text_kernel) == 0.0);
}

TEST_CASE("sup-dakucb with one round explores once") {
    CHECK(sup_stage_count(1) == 1);
    CHECK(sup_stage_count(2) == 1);
    CHECK(sup_stage_count(512) == 9);
    CHECK(sup_stage_count(513) == 10);
    auto env = build_synthetic_env(diverse_layout());
    SupDakUcb p(2, 1, base_config(1.0));
    Rng rng(11);
    const auto rec = p.step(env, rng);
    CHECK(rec.explored);
    CHECK(rec.stage == 1);
    std::size_t total = 0;
    for (std::size_t g = 0; g < 2; ++g) total += p.index_set(g, 1).size();
    CHECK(total == 1);
}

TEST_CASE("sup-dakucb bookkeeping") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto env = build_synthetic_env(diverse_layout());
        PolicyConfig c = base_config(1.0);
        SupDakUcb p(2, 256, c);
        Rng rng(seed);
        const auto records = run_policy(p, env, 256, rng);
        std::set<long> seen;
        std::size_t explored = 0;
        for (const auto& r : records) explored += r.explored ? 1 : 0;
        std::size_t members = 0;
        for (std::size_t g = 0; g < 2; ++g)
            for (int m = 1; m <= p.stages(); ++m)
                for (long i : p.index_set(g, m)) {
                    CHECK(seen.insert(i).second);
                    ++members;
                }
        CHECK(members == explored);
        for (const auto& tr : p.traces())
            for (std::size_t m = 1; m < tr.candidates.size(); ++m) {
                std::set<std::size_t> prev(tr.candidates[m - 1].begin(), tr.candidates[m - 1].end());
                for (auto g : tr.candidates[m]) CHECK(prev.count(g) == 1);
                CHECK_FALSE(tr.candidates[m].empty());
            }
    }
}

TEST_CASE("sup-dakucb keeps a single arm") {
    SyntheticLayout L = diverse_layout();
    L.arms.resize(1);
    auto env = build_synthetic_env(L);
    SupDakUcb p(1, 128, base_config(1.0));
    Rng rng(12);
    for (const auto& r : run_policy(p, env, 128, rng)) CHECK(r.arm == 0);
    for (const auto& tr : p.traces())
        for (const auto& c : tr.candidates) CHECK(c.size() == 1);
}

TEST_CASE("one-arm oracle") {
    auto env = build_synthetic_env(diverse_layout());
    Rng rng(13);
    std::vector<Prompt> validation;
    for (int i = 0; i < 150; ++i) validation.push_back(env.sample_prompt(rng));
    PolicyConfig c = base_config(1.0);
    const auto choice = one_arm_oracle(env, validation, c, rng);
    CHECK(choice.arm == 1);
    CHECK(choice.mean_fidelity[0] == doctest::Approx(choice.mean_fidelity[1]).epsilon(0.01));
    CHECK(choice.ijrke[1] < choice.ijrke[0]);
    c.lambda = 0.0;
    const auto fid_only = one_arm_oracle(env, validation, c, rng);
    CHECK(fid_only.arm == argmax_lowest(fid_only.mean_fidelity));

    SyntheticLayout one = diverse_layout();
    one.arms.resize(1);
    auto single = build_synthetic_env(one);
    CHECK(one_arm_oracle(single, validation, base_config(1.0), rng).arm == 0);
    CHECK_THROWS_AS(one_arm_oracle(env, std::vector<Prompt>{}, c, rng), std::invalid_argument);
}

TEST_CASE("empirical regret") {
    std::vector<RoundRecord> recs(4);
    std::vector<std::vector<double>> j(4, std::vector<double>{0.2, 0.5});
    for (auto& r : recs) r.arm = 1;
    for (double v : empirical_regret(recs, j)) CHECK(v == 0.0);
    j.pop_back();
    CHECK_THROWS_AS(empirical_regret(recs, j), std::invalid_argument);

    auto env = build_synthetic_env(diverse_layout());
    RandomPolicy random(2);
    Rng rng(14);
    const long T = 4000;
    const auto records = run_policy(random, env, T, rng);
    std::vector<std::vector<double>> gap(static_cast<std::size_t>(T), std::vector<double>{1.0, 0.7});
    const auto regret = empirical_regret(records, gap);
    CHECK(regret.back() == doctest::Approx(0.3 * T / 2.0).epsilon(0.05));
}

TEST_CASE("archive snapshots are immutable prefixes") {
    HistoryArchive a(2);
    const Vector v = Vector::Zero(1);
    a.append(0, {v, v, 0, 1});
    const auto id = a.freeze(1, 1);
    a.append(0, {v, v, 0, 2});
    a.append(1, {v, v, 1, 3});
    CHECK(a.snapshot_view(id, 0).size() == 1);
    CHECK(a.snapshot_view(id, 1).empty());
    CHECK(a.live(0).size() == 2);
    CHECK(a.total() == 3);
}

TEST_CASE("random-feature diversity labels approximate the exact ones") {
    PolicyConfig exact = base_config(1.0);
    PolicyConfig approx = exact;
    approx.rff_features = 4096;
    approx.rff_seed = 3;
    DiversityLabeler le(exact, 1), la(approx, 1);
    std::mt19937_64 rng(15);
    std::vector<EmbeddedPair> history;
    for (int i = 0; i < 50; ++i) {
        EmbeddedPair p{oracle::gaussian_vec(2, rng, 0.3), oracle::gaussian_vec(3, rng, 0.5), 0, i};
        le.record(0, p);
        la.record(0, p);
        history.push_back(p);
    }
    double worst = 0.0;
    for (int q = 0; q < 20; ++q) {
        const Vector t = oracle::gaussian_vec(2, rng, 0.3), x = oracle::gaussian_vec(3, rng, 0.5);
        worst = std::max(worst, std::abs(le.label(0, t, x, history) - la.label(0, t, x, history)));
    }
    CHECK(worst <= 0.05);
}
