#include <doctest.h>

#include <cstdint>
#include <fstream>

#include "oracles.hpp"
#include "rpml/dataset.hpp"
#include "test_support.hpp"

using namespace rpml;

namespace {

// random matrix already at f32 precision, so binary storage is lossless
Matrix random_f32_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = static_cast<double>(static_cast<float>(rng.next_gaussian()));
    return m;
}

} // namespace

TEST_CASE("CSV parsing") {
    testsup::TempDir dir;
    SUBCASE("plain 3x2 body") {
        const std::string path = dir.file("m.csv");
        testsup::write_file(path, "1,2\n3,4\n5,6\n");
        const Matrix m = load_features(path, FileFormat::Csv);
        CHECK(m.rows() == 3);
        CHECK(m.cols() == 2);
        CHECK(m(0, 0) == 1.0);
        CHECK(m(2, 1) == 6.0);
    }
    SUBCASE("header line is auto-detected") {
        const std::string path = dir.file("h.csv");
        testsup::write_file(path, "f0,f1\n1.5,2.5\n3.5,4.5\n");
        const Matrix m = load_features(path, FileFormat::Csv);
        CHECK(m.rows() == 2);
        CHECK(m(0, 1) == 2.5);
    }
    SUBCASE("signed and exponent-form values parse") {
        const std::string path = dir.file("s.csv");
        testsup::write_file(path, "+1.5,-2.5e-1\n0.25, 4\n");
        const Matrix m = load_features(path, FileFormat::Csv);
        CHECK(m(0, 0) == 1.5);
        CHECK(m(0, 1) == -0.25);
        CHECK(m(1, 1) == 4.0);
    }
    SUBCASE("ragged row is a positioned error") {
        const std::string path = dir.file("r.csv");
        testsup::write_file(path, "1,2\n3\n");
        CHECK_THROWS_WITH_AS(static_cast<void>(load_features(path, FileFormat::Csv)),
                             doctest::Contains("row 1"), DataError);
    }
    SUBCASE("nan is rejected with its position") {
        const std::string path = dir.file("n.csv");
        testsup::write_file(path, "1,2\n3,nan\n");
        CHECK_THROWS_WITH_AS(static_cast<void>(load_features(path, FileFormat::Csv)),
                             doctest::Contains("(row 1, col 1)"), DataError);
    }
}

TEST_CASE("binary container") {
    testsup::TempDir dir;
    SUBCASE("zero-row header is an empty dataset") {
        const std::string path = dir.file("empty.bin");
        std::ofstream out(path, std::ios::binary);
        out.write("RPML", 4);
        const std::uint32_t version = 1;
        const std::uint64_t rows = 0, cols = 4;
        out.write(reinterpret_cast<const char*>(&version), 4);
        out.write(reinterpret_cast<const char*>(&rows), 8);
        out.write(reinterpret_cast<const char*>(&cols), 8);
        out.close();
        CHECK_THROWS_WITH_AS(static_cast<void>(load_features(path, FileFormat::Binary)),
                             doctest::Contains("empty dataset"), DataError);
    }
    SUBCASE("bad magic is rejected") {
        const std::string path = dir.file("bad.bin");
        testsup::write_file(path, "NOPE not a container at all.....");
        CHECK_THROWS_AS(static_cast<void>(load_features(path, FileFormat::Binary)), DataError);
    }
    SUBCASE("100x64 round-trip is bit exact") {
        const Matrix m = random_f32_matrix(100, 64, 42);
        const std::string path = dir.file("m.bin");
        save_features(m, path, FileFormat::Binary);
        const Matrix back = load_features(path, FileFormat::Binary);
        CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
        // second generation byte-identical
        const std::string path2 = dir.file("m2.bin");
        save_features(back, path2, FileFormat::Binary);
        CHECK(testsup::read_file(path) == testsup::read_file(path2));
    }
}

TEST_CASE("CSV round-trip at storage precision") {
    testsup::TempDir dir;
    const Matrix m = random_f32_matrix(20, 7, 7);
    const std::string path = dir.file("m.csv");
    save_features(m, path, FileFormat::Csv);
    const Matrix back = load_features(path, FileFormat::Csv);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("embedding container") {
    testsup::TempDir dir;
    SUBCASE("identity-like embedding round-trips exactly") {
        const Matrix L = Matrix::Identity(6, 3);
        const std::string path = dir.file("L.bin");
        save_embedding(L, path);
        CHECK((load_embedding(path) - L).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("orthonormal 64x8 round-trips exactly at storage precision") {
        Rng rng(8);
        Matrix L = oracle::random_orthonormal(64, 8, rng);
        L = L.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
        const std::string path = dir.file("Q.bin");
        save_embedding(L, path);
        CHECK((load_embedding(path) - L).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("unwritable path reports the OS error") {
        CHECK_THROWS_AS(save_embedding(Matrix::Identity(3, 2), "/nonexistent_dir_zz/L.bin"),
                        DataError);
    }
}

TEST_CASE("labels file") {
    testsup::TempDir dir;
    const std::string path = dir.file("labels.txt");
    save_labels({0, 1, 1, 2, 0}, path);
    const Labels back = load_labels(path);
    CHECK(back == Labels{0, 1, 1, 2, 0});

    testsup::write_file(path, "0\n-3\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_labels(path)), doctest::Contains("negative"),
                         DataError);
    testsup::write_file(path, "0\nx\n");
    CHECK_THROWS_AS(static_cast<void>(load_labels(path)), DataError);
}
