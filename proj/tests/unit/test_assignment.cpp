#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "reclink/assignment.hpp"
#include "reclink/rng.hpp"

using namespace reclink;

namespace {

// Best total over every injective map of min(n1, n2) rows or columns.
double exhaustive_best(const std::vector<double>& w, std::size_t n1, std::size_t n2) {
    const bool rows_small = n1 <= n2;
    const std::size_t small = rows_small ? n1 : n2, big = rows_small ? n2 : n1;
    std::vector<std::size_t> idx(big);
    std::iota(idx.begin(), idx.end(), 0);
    double best = -INFINITY;
    // Permutations of the larger side; the first `small` entries are the partners.
    do {
        double total = 0.0;
        for (std::size_t k = 0; k < small; ++k)
            total += rows_small ? w[k * n2 + idx[k]] : w[idx[k] * n2 + k];
        best = std::max(best, total);
    } while (std::next_permutation(idx.begin(), idx.end()));
    return best;
}

void expect_valid(const std::vector<int>& rows, std::size_t n1, std::size_t n2) {
    ASSERT_EQ(rows.size(), n1);
    std::vector<int> seen(n2, 0);
    std::size_t assigned = 0;
    for (int j : rows) {
        if (j < 0) continue;
        ASSERT_LT(static_cast<std::size_t>(j), n2);
        EXPECT_EQ(seen[static_cast<std::size_t>(j)]++, 0);
        ++assigned;
    }
    EXPECT_EQ(assigned, std::min(n1, n2));
}

}  // namespace

TEST(Assignment, CrossBeatsDiagonal) {
    const std::vector<double> w{1, 2, 3, 0};
    EXPECT_EQ(solve_assignment(w, 2, 2), (std::vector<int>{1, 0}));
}

TEST(Assignment, DominantDiagonalGivesIdentity) {
    std::vector<double> w(16, 0.1);
    for (int i = 0; i < 4; ++i) w[i * 4 + i] = 5.0;
    EXPECT_EQ(solve_assignment(w, 4, 4), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Assignment, EqualWeightsTieBreakToIdentity) {
    EXPECT_EQ(solve_assignment(std::vector<double>(9, 1.0), 3, 3), (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(solve_assignment(std::vector<double>(15, 1.0), 3, 5), (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(solve_assignment(std::vector<double>(15, 1.0), 5, 3), (std::vector<int>{0, 1, 2, -1, -1}));
}

TEST(Assignment, EmptyInputs) {
    EXPECT_TRUE(solve_assignment({}, 0, 3).empty());
    EXPECT_EQ(solve_assignment({}, 2, 0), (std::vector<int>{-1, -1}));
}

TEST(Assignment, MatchesExhaustiveSearchUpToSixBySix) {
    Rng rng(99);
    for (std::size_t n1 = 1; n1 <= 6; ++n1)
        for (std::size_t n2 = 1; n2 <= 6; ++n2)
            for (int rep = 0; rep < 25; ++rep) {
                std::vector<double> w(n1 * n2);
                // Integer weights produce plenty of ties; negative ones too.
                for (auto& x : w) x = rep % 2 ? std::floor(uniform01(rng) * 5) - 2 : uniform01(rng) * 10 - 3;
                const auto rows = solve_assignment(w, n1, n2);
                expect_valid(rows, n1, n2);
                EXPECT_NEAR(assignment_weight(w, n2, rows), exhaustive_best(w, n1, n2), 1e-9)
                    << n1 << "x" << n2 << " rep " << rep;
            }
}
