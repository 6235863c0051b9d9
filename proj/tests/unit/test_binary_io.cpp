#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "tomopet/binary_io.hpp"
#include "tomopet/error.hpp"
#include "tomopet/hashing.hpp"
#include "tomopet/parallel.hpp"
#include "tomopet/rng.hpp"

using namespace tomopet;

TEST(ByteIo, RoundTripsLittleEndianFields) {
    ByteWriter w;
    w.magic("TEST", 3);
    w.u8(7);
    w.u32(0x01020304u);
    w.u64(0x0102030405060708ull);
    w.f32(1.5f);
    w.f64(-2.25);
    const Bytes b = std::move(w).bytes();
    ASSERT_EQ(b.size(), 5u + 1 + 4 + 8 + 4 + 8);
    EXPECT_EQ(b[6], 0x04);
    EXPECT_EQ(b[9], 0x01);

    ByteReader r(b, "TEST");
    r.expect_magic("TEST", 3);
    EXPECT_EQ(r.u8(), 7);
    EXPECT_EQ(r.u32(), 0x01020304u);
    EXPECT_EQ(r.u64(), 0x0102030405060708ull);
    EXPECT_EQ(r.f32(), 1.5f);
    EXPECT_EQ(r.f64(), -2.25);
    EXPECT_NO_THROW(r.expect_end());
}

TEST(ByteIo, ReadPastEndIsFormatError) {
    const Bytes b{1, 2, 3};
    ByteReader r(b, "x");
    EXPECT_THROW(r.u32(), FormatError);
}

TEST(ByteIo, WrongMagicOrVersionIsFormatError) {
    ByteWriter w;
    w.magic("ABCD", 1);
    const Bytes b = std::move(w).bytes();
    ByteReader r1(b, "x");
    EXPECT_THROW(r1.expect_magic("ABCE", 1), FormatError);
    ByteReader r2(b, "x");
    EXPECT_THROW(r2.expect_magic("ABCD", 2), FormatError);
}

TEST(ByteIo, TrailingBytesAreFormatError) {
    const Bytes b{1, 2};
    ByteReader r(b, "x");
    r.u8();
    EXPECT_THROW(r.expect_end(), FormatError);
}

TEST(ByteIo, MissingFileIsIoError) {
    EXPECT_THROW(read_file("/nonexistent/dir/file.bin"), IoError);
    EXPECT_THROW(write_file("/nonexistent/dir/file.bin", Bytes{1}), IoError);
}

TEST(Hashing, Sha256KnownVectors) {
    EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(to_hex(sha256(std::string_view(""))),
              "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Rng, SameSeedAndStreamRepeat) {
    Rng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        EXPECT_EQ(x, b.uniform());
        EXPECT_GE(x, 0.0);
        EXPECT_LT(x, 1.0);
    }
    int same_c = 0, same_d = 0;
    Rng a2(42, 3);
    for (int i = 0; i < 100; ++i) {
        const double x = a2.uniform();
        same_c += x == c.uniform();
        same_d += x == d.uniform();
    }
    EXPECT_EQ(same_c, 0);
    EXPECT_EQ(same_d, 0);
}

TEST(Rng, NormalHasUnitMoments) {
    Rng r(7, 0);
    const int n = 200000;
    double s = 0, q = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        q += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(double(n)));
    EXPECT_NEAR(q / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Parallel, BlockedSumIndependentOfWorkerCount) {
    const std::size_t n = 3 * kReductionBlock + 17;
    auto term = [](std::size_t i) { return 1.0 / double(i + 1); };
    set_num_threads(1);
    const double one = blocked_sum(n, term);
    set_num_threads(4);
    const double four = blocked_sum(n, term);
    set_num_threads(1);
    EXPECT_EQ(one, four);
    double naive = 0;
    for (std::size_t i = 0; i < n; ++i) naive += term(i);
    EXPECT_NEAR(one, naive, 1e-12 * naive);
}

TEST(Parallel, ExceptionSlotRethrowsFirstError) {
    ExceptionSlot slot;
    slot.run([] { throw ValidationError("boom"); });
    slot.run([] {});
    EXPECT_THROW(slot.rethrow_if_set(), ValidationError);
}
