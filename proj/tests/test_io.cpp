#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "wafertex/complexity.hpp"
#include "wafertex/config.hpp"
#include "wafertex/image_io.hpp"
#include "wafertex/records.hpp"

using namespace wafertex;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("wafertex_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path path(const std::string& name) const { return dir_ / name; }
    void write_bytes(const std::string& name, const std::string& bytes) const {
        std::ofstream(path(name), std::ios::binary) << bytes;
    }

    fs::path dir_;
};

std::string float_bytes(float v, bool little) {
    char b[4];
    std::memcpy(b, &v, 4);
    if (little != (std::endian::native == std::endian::little)) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
    return std::string(b, 4);
}

std::string expect_io_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const IoError& e) {
        return e.what();
    }
    ADD_FAILURE() << "expected IoError";
    return {};
}

}  // namespace

using Pfm = TempDir;
using Pgm = TempDir;
using Wtns = TempDir;
using Records = TempDir;

TEST_F(Pfm, RoundTripIsBitIdentical) {
    std::mt19937_64 rng(60);
    Tensor t = oracle::random_tensor(rng, 1, 7, 5, -1e6, 1e6);
    t[3] = std::numeric_limits<float>::denorm_min();
    t[4] = -0.0f;
    write_pfm(path("a.pfm"), t);
    const Tensor r = read_pfm(path("a.pfm"));
    ASSERT_EQ(r.height(), 7u);
    EXPECT_EQ(std::memcmp(r.data().data(), t.data().data(), t.size() * 4), 0);
}

TEST_F(Pfm, HandBuiltEndiannessAndRowOrder) {
    // 2 x 2 image, top row (1, 2), bottom row (3, 4); file stores the bottom row first.
    const std::string le = "Pf\n2 2\n-1.0\n" + float_bytes(3, true) + float_bytes(4, true) + float_bytes(1, true) +
                           float_bytes(2, true);
    const std::string be = "Pf\n2 2\n1.0\n" + float_bytes(3, false) + float_bytes(4, false) +
                           float_bytes(1, false) + float_bytes(2, false);
    write_bytes("le.pfm", le);
    write_bytes("be.pfm", be);
    const std::vector<float> expect = {1, 2, 3, 4};
    EXPECT_EQ(read_pfm(path("le.pfm")).values(), expect);
    EXPECT_EQ(read_pfm(path("be.pfm")).values(), expect);
    write_pfm(path("out.pfm"), Tensor(1, 2, 2, expect));
    const auto bytes = read_file(path("out.pfm"));
    EXPECT_EQ(std::string(bytes.begin(), bytes.end()), le);
}

TEST_F(Pfm, MalformedReportsOffset) {
    write_bytes("short.pfm", "Pf\n2 2\n-1.0\n" + float_bytes(1, true));
    EXPECT_NE(expect_io_error([&] { read_pfm(path("short.pfm")); }).find("at byte"), std::string::npos);
    write_bytes("magic.pfm", "PF\n1 1\n-1.0\n" + std::string(12, '\0'));
    EXPECT_NE(expect_io_error([&] { read_pfm(path("magic.pfm")); }).find("at byte 0"), std::string::npos);
    EXPECT_THROW(read_pfm(path("missing.pfm")), IoError);
    EXPECT_THROW(write_pfm(path("x.pfm"), Tensor(2, 2, 2)), std::invalid_argument);
}

TEST_F(Pgm, EightAndSixteenBit) {
    write_bytes("gray.pgm", "P5\n2 2\n255\n" + std::string(4, static_cast<char>(128)));
    const Tensor g = read_pgm(path("gray.pgm"));
    for (const float v : g.data()) EXPECT_EQ(v, 128.0f);
    write_bytes("deep.pgm", std::string("P5\n# comment\n2 1\n65535\n\x01\x02\xff\xfe", 27));
    EXPECT_EQ(read_pgm(path("deep.pgm")).values(), (std::vector<float>{258, 65534}));

    const Tensor t(1, 1, 4, {-3.0f, 0.4f, 200.6f, 999.0f});
    write_pgm(path("w.pgm"), t);
    EXPECT_EQ(read_pgm(path("w.pgm")).values(), (std::vector<float>{0, 0, 201, 255}));
    write_pgm(path("w16.pgm"), t, 65535);
    EXPECT_EQ(read_pgm(path("w16.pgm")).values(), (std::vector<float>{0, 0, 201, 999}));
    EXPECT_THROW(write_pgm(path("bad.pgm"), t, 100), std::invalid_argument);

    write_bytes("trunc.pgm", "P5\n2 2\n255\n\x01");
    EXPECT_NE(expect_io_error([&] { read_pgm(path("trunc.pgm")); }).find("at byte 12"), std::string::npos);
    write_bytes("p2.pgm", "P2\n1 1\n255\n0\n");
    EXPECT_THROW(read_pgm(path("p2.pgm")), IoError);
}

TEST_F(Pgm, MaskAndHeatmap) {
    const Mask m(1, 2, 3, {0, 1, 1, 0, 0, 1});
    write_mask_pgm(path("m.pgm"), m);
    EXPECT_EQ(read_mask_pgm(path("m.pgm")), m);
    write_heatmap(path("h.pgm"), Tensor(1, 1, 3, {-1.0f, 0.0f, 3.0f}));
    EXPECT_EQ(read_pgm(path("h.pgm")).values(), (std::vector<float>{0, 64, 255}));
    const auto side = read_file(path("h.pgm.range.txt"));
    EXPECT_EQ(std::string(side.begin(), side.end()), "min=-1.000000\nmax=3.000000\n");
}

TEST_F(Wtns, RoundTripAndErrors) {
    std::mt19937_64 rng(61);
    const NamedTensors t = {{"alpha", oracle::random_tensor(rng, 2, 3, 4)}, {"b", oracle::random_tensor(rng, 1, 1, 5)}};
    write_tensors(path("t.wtns"), t);
    EXPECT_EQ(read_tensors(path("t.wtns")), t);
    write_bytes("bad.wtns", "WTNX");
    EXPECT_NE(expect_io_error([&] { read_tensors(path("bad.wtns")); }).find("at byte 0"), std::string::npos);
    const auto bytes = read_file(path("t.wtns"));
    write_bytes("cut.wtns", std::string(bytes.begin(), bytes.end() - 3));
    EXPECT_THROW(read_tensors(path("cut.wtns")), IoError);
}

TEST_F(Records, ParsePrintIsBitExact) {
    std::mt19937_64 rng(62);
    std::vector<DetectionRecord> recs;
    for (int i = 0; i < 100; ++i) {
        DetectionRecord r;
        r.image_id = "img_" + std::to_string(i % 7);
        r.detection.class_id = static_cast<int>(rng() % 7);
        r.detection.score = oracle::uniform(rng, 0, 1);
        r.detection.box = {oracle::uniform(rng, 0, 50), oracle::uniform(rng, 0, 50), oracle::uniform(rng, 50, 100),
                           1e-300 * oracle::uniform(rng, 1, 2)};
        if (i % 3 == 0) {
            Mask m(1, 3, 4);
            for (auto& v : m.data()) v = rng() % 2;
            r.detection.mask = rle_encode(m);
        }
        EXPECT_EQ(parse_record(format_record(r)), r);
        recs.push_back(r);
    }
    write_records(path("r.txt"), recs);
    EXPECT_EQ(read_records(path("r.txt")), recs);
    EXPECT_EQ(format_real(0.1), "0.1");
}

TEST(RecordsText, Strictness) {
    EXPECT_THROW(parse_record("a 0 0.5 0 0 1"), std::invalid_argument);
    EXPECT_THROW(parse_record("a -1 0.5 0 0 1 1"), std::invalid_argument);
    EXPECT_THROW(parse_record("a 0 nan 0 0 1 1"), std::invalid_argument);
    EXPECT_THROW(parse_record("a 0 0.5 0 0 1 1 rle 2 2 1 1 1"), std::invalid_argument);
    EXPECT_THROW(parse_records("a 0 0.5 0 0 1 1\r\n", "x"), std::invalid_argument);
    try {
        parse_records("# header\na 0 0.5 0 0 1 1\nb 0 zz 0 0 1 1\n", "preds.txt");
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("preds.txt:3"), std::string::npos) << e.what();
    }
    const auto recs = parse_records("# c\n\nb 1 0.5 0 0 1 1\na 0 0.25 0 0 2 2\n");
    ASSERT_EQ(recs.size(), 2u);
    const auto grouped = group_by_image(recs, {recs[0]});
    ASSERT_EQ(grouped.size(), 2u);
    EXPECT_EQ(grouped[0].image_id, "a");
    EXPECT_EQ(grouped[1].ground_truth.size(), 1u);
}

TEST(ConfigText, StrictKeysAndTypes) {
    const Config c = Config::parse("# c\nalpha = 0.5\nname=x\nflag=true\nn=-3\n", {"alpha", "name", "flag", "n", "k"});
    EXPECT_DOUBLE_EQ(c.get_double("alpha", 0), 0.5);
    EXPECT_EQ(c.get_string("name", ""), "x");
    EXPECT_TRUE(c.get_bool("flag", false));
    EXPECT_EQ(c.get_int("n", 0), -3);
    EXPECT_EQ(c.get_uint("k", 9), 9u);
    EXPECT_THROW(c.get_uint("n", 0), std::invalid_argument);
    EXPECT_THROW(c.get_double("name", 0), std::invalid_argument);
    try {
        Config::parse("alpha=1\nbeta=2\n", {"alpha"}, "run.cfg");
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    }
    EXPECT_THROW(Config::parse("alpha=1\nalpha=2\n", {"alpha"}), std::invalid_argument);
    EXPECT_THROW(Config::parse("alpha\n", {"alpha"}), std::invalid_argument);
    EXPECT_THROW(Config::parse("alpha=inf\n", {"alpha"}).get_double("alpha", 0), std::invalid_argument);
}

TEST(Complexity, HandDerivedFixtures) {
    const auto conv = [](std::size_t in, std::size_t out, std::size_t k, std::size_t s, std::size_t size,
                         std::size_t g = 1) {
        LayerDescriptor d;
        d.kind = g > 1 ? "dwconv" : "conv";
        d.in_channels = in;
        d.out_channels = out;
        d.kernel = k;
        d.stride = s;
        d.padding = k / 2;
        d.groups = g;
        d.input_size = size;
        return layer_cost(d);
    };
    EXPECT_EQ(conv(3, 64, 3, 2, 640).params, 64u * 27 + 64);
    EXPECT_EQ(conv(3, 64, 3, 2, 640).params, 1792u);
    EXPECT_EQ(conv(3, 64, 3, 2, 640).flops, 2ull * 64 * 27 * 320 * 320);
    EXPECT_EQ(conv(3, 64, 3, 2, 640).output_size, 320u);
    EXPECT_EQ(conv(64, 128, 3, 2, 320).params, 73856u);
    EXPECT_EQ(conv(128, 256, 3, 2, 160).params, 295168u);
    EXPECT_EQ(conv(1024, 1024, 1, 1, 20).params, 1049600u);
    EXPECT_EQ(conv(1024, 1024, 3, 1, 20, 1024).params, 10240u);
    LayerDescriptor se = parse_layer("effective_se in=1024 out=1024 g=1024 size=20");
    EXPECT_EQ(layer_cost(se).params, 2048u);
    EXPECT_EQ(count_params_flops({}).params, 0u);
    EXPECT_EQ(count_params_flops({}).flops, 0u);
}

TEST(Complexity, ParseAndErrors) {
    const LayerDescriptor d = parse_layer("conv in=3 out=64 k=3 s=2 p=1 g=1 n=1 size=640 bias=0 label=stem");
    EXPECT_EQ(d.kind, "conv");
    EXPECT_EQ(d.out_channels, 64u);
    EXPECT_FALSE(d.bias);
    EXPECT_EQ(d.label, "stem");
    EXPECT_EQ(layer_cost(d).params, 1728u);
    EXPECT_THROW(parse_layer("conv in=3 out=64 colour=red size=8"), std::invalid_argument);
    try {
        layer_cost(parse_layer("transformer in=3 out=4 size=8"));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("transformer"), std::string::npos);
    }
    const auto table = reference_layer_table();
    const auto totals = count_params_flops(table);
    EXPECT_EQ(totals.layers.size(), table.size());
    std::uint64_t sum = 0;
    for (const auto& l : totals.layers) sum += l.params;
    EXPECT_EQ(sum, totals.params);
}
