#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "rpml/triplets.hpp"

using namespace rpml;

TEST_CASE("generate_triplets") {
    SUBCASE("two balanced clusters, one per anchor") {
        const TripletSet set = generate_triplets({0, 0, 1, 1}, 1, 7);
        CHECK(set.items.size() == 4);
        const Labels labels{0, 0, 1, 1};
        for (const auto& t : set.items) {
            CHECK(t.a != t.p);
            CHECK(labels[static_cast<std::size_t>(t.a)] == labels[static_cast<std::size_t>(t.p)]);
            CHECK(labels[static_cast<std::size_t>(t.a)] != labels[static_cast<std::size_t>(t.n)]);
        }
    }
    SUBCASE("single cluster has no negatives") {
        CHECK_THROWS_WITH_AS(static_cast<void>(generate_triplets({0, 0, 0}, 1, 7)),
                             doctest::Contains("no negatives"), DataError);
    }
    SUBCASE("all singletons have no positives") {
        CHECK_THROWS_WITH_AS(static_cast<void>(generate_triplets({0, 1, 2}, 1, 7)),
                             doctest::Contains("no positives"), DataError);
    }
    SUBCASE("singleton cluster: never anchor or positive, allowed as negative") {
        const Labels labels{0, 0, 0, 1, 1, 2}; // index 5 is a singleton
        const TripletSet set = generate_triplets(labels, 4, 11);
        CHECK(set.skipped_anchors == 1);
        CHECK(set.items.size() == 5 * 4);
        bool seen_as_negative = false;
        for (const auto& t : set.items) {
            CHECK(t.a != 5);
            CHECK(t.p != 5);
            seen_as_negative = seen_as_negative || t.n == 5;
        }
        CHECK(seen_as_negative); // 4 draws x 5 anchors make a miss vanishingly unlikely
    }
    SUBCASE("deterministic in the seed") {
        const Labels labels{0, 0, 1, 1, 1, 2, 2};
        const TripletSet a = generate_triplets(labels, 3, 99);
        const TripletSet b = generate_triplets(labels, 3, 99);
        REQUIRE(a.items.size() == b.items.size());
        for (std::size_t i = 0; i < a.items.size(); ++i) {
            CHECK(a.items[i].a == b.items[i].a);
            CHECK(a.items[i].p == b.items[i].p);
            CHECK(a.items[i].n == b.items[i].n);
        }
        const TripletSet c = generate_triplets(labels, 3, 100);
        bool any_differ = false;
        for (std::size_t i = 0; i < a.items.size(); ++i)
            any_differ = any_differ || a.items[i].p != c.items[i].p || a.items[i].n != c.items[i].n;
        CHECK(any_differ);
    }
    SUBCASE("every emitted triplet satisfies the label constraints") {
        Rng rng(12);
        Labels labels;
        for (int i = 0; i < 60; ++i)
            labels.push_back(rng.next_index(6));
        const TripletSet set = generate_triplets(labels, 5, 13);
        for (const auto& t : set.items) {
            CHECK(t.a != t.p);
            CHECK(labels[static_cast<std::size_t>(t.a)] == labels[static_cast<std::size_t>(t.p)]);
            CHECK(labels[static_cast<std::size_t>(t.a)] != labels[static_cast<std::size_t>(t.n)]);
        }
    }
}

TEST_CASE("build_batch") {
    SUBCASE("hand-worked example") {
        Matrix X(3, 2);
        X << 0.0, 0.0, 2.0, 0.0, 0.0, 4.0;
        const TripletBatch b = build_batch(X, {{0, 1, 2}});
        CHECK(b.A(0, 0) == 1.0);
        CHECK(b.A(1, 0) == 0.0);
        CHECK(b.C(0, 0) == 1.0);
        CHECK(b.C(1, 0) == 0.0);
        CHECK(b.C(2, 0) == 0.0);
        CHECK(b.C(3, 0) == 4.0);
        CHECK(b.D_ap(0, 0) == -2.0);
        CHECK(b.D_ap(1, 0) == 0.0);
        CHECK(b.D_nm(0, 0) == -1.0);
        CHECK(b.D_nm(1, 0) == 4.0);
    }
    SUBCASE("coincident anchor and positive") {
        Matrix X(2, 3);
        X << 1.0, 2.0, 3.0, 9.0, 9.0, 9.0;
        const TripletBatch b = build_batch(X, {{0, 0, 1}});
        CHECK(b.D_ap.col(0).norm() == 0.0);
        CHECK((b.A.col(0) - X.row(0).transpose()).norm() == 0.0);
    }
    SUBCASE("random batch columns match per-triplet recomputation") {
        Rng rng(14);
        const Matrix X = oracle::random_matrix(20, 5, rng);
        std::vector<Triplet> ts;
        for (int i = 0; i < 40; ++i)
            ts.push_back({rng.next_index(20), rng.next_index(20), rng.next_index(20)});
        const TripletBatch b = build_batch(X, ts);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const Eigen::Index c = static_cast<Eigen::Index>(i);
            const Vector xa = X.row(ts[i].a).transpose();
            const Vector xp = X.row(ts[i].p).transpose();
            const Vector xn = X.row(ts[i].n).transpose();
            CHECK((b.A.col(c) - 0.5 * (xa + xp)).norm() == 0.0);
            CHECK((b.C.col(c).head(5) - b.A.col(c)).norm() == 0.0);
            CHECK((b.C.col(c).tail(5) - xn).norm() == 0.0);
            CHECK((b.D_ap.col(c) - (xa - xp)).norm() == 0.0);
            CHECK((b.D_nm.col(c) - (xn - b.A.col(c))).norm() == 0.0);
        }
    }
    SUBCASE("out-of-range index names the triplet") {
        Matrix X = Matrix::Random(3, 2);
        CHECK_THROWS_WITH_AS(static_cast<void>(build_batch(X, {{0, 1, 2}, {0, 1, 5}})),
                             doctest::Contains("triplet 1"), DataError);
    }
}
