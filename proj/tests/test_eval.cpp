#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "rpml/eval.hpp"

using namespace rpml;

namespace {

double wcss_of(const Matrix& E, const Labels& labels) {
    std::map<int, std::pair<Vector, int>> acc;
    for (int i = 0; i < E.rows(); ++i) {
        auto [it, fresh] = acc.try_emplace(labels[static_cast<std::size_t>(i)],
                                           Vector::Zero(E.cols()), 0);
        it->second.first += E.row(i).transpose();
        ++it->second.second;
    }
    double total = 0.0;
    for (int i = 0; i < E.rows(); ++i) {
        const auto& [sum, count] = acc.at(labels[static_cast<std::size_t>(i)]);
        total += (E.row(i).transpose() - sum / count).squaredNorm();
    }
    return total;
}

} // namespace

TEST_CASE("kmeans") {
    SUBCASE("k = n gives singleton clusters with zero WCSS") {
        Rng rng(70);
        const Matrix E = oracle::random_matrix(12, 3, rng);
        const Labels labels = kmeans(E, 12, 1);
        std::set<int> distinct(labels.begin(), labels.end());
        CHECK(distinct.size() == 12);
        CHECK(wcss_of(E, labels) == 0.0);
    }
    SUBCASE("two far blobs split cleanly") {
        Rng rng(71);
        Matrix centers(2, 2);
        centers << 0.0, 0.0, 100.0, 0.0;
        Labels truth;
        const Matrix E = oracle::gaussian_blobs(centers, 30, 1.0, rng, &truth);
        const Labels pred = kmeans(E, 2, 2);
        for (int i = 1; i < 60; ++i)
            CHECK((pred[static_cast<std::size_t>(i)] == pred[0]) ==
                  (truth[static_cast<std::size_t>(i)] == truth[0]));
    }
    SUBCASE("k = 1 is the mean with total-variance WCSS") {
        Rng rng(72);
        const Matrix E = oracle::random_matrix(25, 4, rng);
        const Labels labels = kmeans(E, 1, 3);
        for (int v : labels)
            CHECK(v == 0);
        const Vector mean = E.colwise().mean().transpose();
        double want = 0.0;
        for (int i = 0; i < 25; ++i)
            want += (E.row(i).transpose() - mean).squaredNorm();
        CHECK(wcss_of(E, labels) == doctest::Approx(want).epsilon(1e-12));
    }
    SUBCASE("more restarts never hurt") {
        Rng rng(73);
        const Matrix E = oracle::random_matrix(40, 3, rng);
        CHECK(wcss_of(E, kmeans(E, 5, 4, 10)) <= wcss_of(E, kmeans(E, 5, 4, 1)) + 1e-12);
    }
    SUBCASE("k > n is a parameter error") {
        CHECK_THROWS_AS(static_cast<void>(kmeans(Matrix::Random(3, 2), 4, 0)), UsageError);
    }
}

TEST_CASE("nmi") {
    SUBCASE("identical labelings score exactly 1") {
        CHECK(nmi({0, 0, 1, 1, 2}, {0, 0, 1, 1, 2}) == 1.0);
        // relabeling permutations keep it exact
        CHECK(nmi({0, 0, 1, 1, 2}, {5, 5, 9, 9, 7}) == 1.0);
    }
    SUBCASE("single-cluster prediction scores exactly 0") {
        CHECK(nmi({0, 0, 1, 1}, {3, 3, 3, 3}) == 0.0);
    }
    SUBCASE("independent partitions score 0") {
        CHECK(std::abs(nmi({0, 0, 1, 1}, {0, 1, 0, 1})) < 1e-12);
    }
    SUBCASE("symmetric and permutation invariant") {
        Rng rng(74);
        Labels a, b;
        for (int i = 0; i < 50; ++i) {
            a.push_back(rng.next_index(4));
            b.push_back(rng.next_index(3));
        }
        CHECK(nmi(a, b) == doctest::Approx(nmi(b, a)).epsilon(1e-12));
        Labels b_renamed;
        for (int v : b)
            b_renamed.push_back(7 - v);
        CHECK(nmi(a, b) == doctest::Approx(nmi(a, b_renamed)).epsilon(1e-12));
    }
    SUBCASE("both single-cluster scores 1 by convention") {
        CHECK(nmi({0, 0, 0}, {4, 4, 4}) == 1.0);
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(static_cast<void>(nmi({0, 1}, {0, 1, 2})), UsageError);
    }
}

TEST_CASE("pairwise_prf") {
    SUBCASE("perfect prediction") {
        const Prf prf = pairwise_prf({0, 0, 1, 1}, {1, 1, 0, 0});
        CHECK(prf.precision == 1.0);
        CHECK(prf.recall == 1.0);
        CHECK(prf.f == 1.0);
    }
    SUBCASE("all singleton prediction") {
        const Prf prf = pairwise_prf({0, 0, 1, 1}, {0, 1, 2, 3});
        CHECK(prf.precision == 0.0);
        CHECK(prf.recall == 0.0);
        CHECK(prf.f == 0.0);
    }
    SUBCASE("six-pair hand enumeration") {
        const Prf prf = pairwise_prf({0, 0, 1, 1}, {0, 0, 0, 1});
        CHECK(prf.precision == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(prf.recall == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(prf.f == doctest::Approx(0.4).epsilon(1e-12));
    }
    SUBCASE("invariant under label permutations") {
        Rng rng(75);
        Labels truth, pred;
        for (int i = 0; i < 40; ++i) {
            truth.push_back(rng.next_index(4));
            pred.push_back(rng.next_index(5));
        }
        Labels pred_renamed;
        for (int v : pred)
            pred_renamed.push_back((v * 7 + 3) % 11);
        const Prf a = pairwise_prf(truth, pred);
        const Prf b = pairwise_prf(truth, pred_renamed);
        CHECK(a.precision == b.precision);
        CHECK(a.recall == b.recall);
        CHECK(a.f == b.f);
    }
}

TEST_CASE("recall_at_k") {
    SUBCASE("all-singleton classes score zero") {
        Rng rng(76);
        const Matrix E = oracle::random_matrix(10, 3, rng);
        Labels labels;
        for (int i = 0; i < 10; ++i)
            labels.push_back(i);
        for (const auto& [k, v] : recall_at_k(E, labels, {1, 2, 5}))
            CHECK(v == 0.0);
    }
    SUBCASE("exact duplicates give perfect R@1") {
        Rng rng(77);
        Matrix half = oracle::random_matrix(8, 4, rng);
        Matrix E(16, 4);
        E << half, half;
        Labels labels;
        for (int i = 0; i < 16; ++i)
            labels.push_back(i % 8);
        const auto r = recall_at_k(E, labels, {1});
        CHECK(r[0].second == 100.0);
    }
    SUBCASE("matches a double-loop oracle and is monotone in K") {
        Rng rng(78);
        Matrix centers(3, 4);
        centers.setZero();
        centers(1, 0) = 4.0;
        centers(2, 1) = 4.0;
        Labels labels;
        const Matrix E = oracle::gaussian_blobs(centers, 12, 1.5, rng, &labels);
        const std::vector<int> ks{1, 2, 4, 8};
        const auto got = recall_at_k(E, labels, ks);

        double prev = 0.0;
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            int hits = 0;
            for (int i = 0; i < E.rows(); ++i) {
                std::vector<std::pair<double, int>> order;
                for (int j = 0; j < E.rows(); ++j)
                    if (j != i)
                        order.emplace_back((E.row(i) - E.row(j)).squaredNorm(), j);
                std::sort(order.begin(), order.end());
                for (int r = 0; r < ks[ki]; ++r)
                    if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)] ==
                        labels[static_cast<std::size_t>(i)]) {
                        ++hits;
                        break;
                    }
            }
            const double want = 100.0 * hits / static_cast<double>(E.rows());
            CHECK(got[ki].second == want);
            CHECK(got[ki].second >= prev);
            prev = got[ki].second;
        }
    }
    SUBCASE("threaded run matches single-threaded") {
        Rng rng(79);
        const Matrix E = oracle::random_matrix(50, 5, rng);
        Labels labels;
        for (int i = 0; i < 50; ++i)
            labels.push_back(rng.next_index(5));
        CHECK(recall_at_k(E, labels, {1, 3}, 1) == recall_at_k(E, labels, {1, 3}, 4));
    }
    SUBCASE("K >= n is rejected") {
        Rng rng(80);
        const Matrix E = oracle::random_matrix(5, 2, rng);
        CHECK_THROWS_AS(static_cast<void>(recall_at_k(E, {0, 0, 1, 1, 2}, {5})), UsageError);
    }
}
