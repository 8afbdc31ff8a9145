#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>

using namespace leader;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("leader_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string bytes_of(std::initializer_list<int> v) {
    std::string s;
    for (int b : v) s.push_back(static_cast<char>(b));
    return s;
}

}  // namespace

TEST(Pgm, DecodeKnownBytes) {
    const Tensor t = io::decode_pgm("P5\n2 2\n255\n" + bytes_of({0, 255, 128, 64}));
    EXPECT_EQ(t.height(), 2u);
    EXPECT_EQ(t.width(), 2u);
    EXPECT_EQ(t.at(0, 0), 0.0f);
    EXPECT_EQ(t.at(0, 1), 1.0f);
    EXPECT_NEAR(t.at(1, 0), 0.50196, 1e-5);
    EXPECT_NEAR(t.at(1, 1), 0.25098, 1e-5);
    // Comments inside the header are skipped.
    EXPECT_EQ(io::decode_pgm("P5 # c\n2 1\n255\n" + bytes_of({1, 2})).width(), 2u);
    EXPECT_THROW(io::decode_pgm("P5\n2 2\n255\n" + bytes_of({0, 1})), io::TruncationError);
    EXPECT_THROW(io::decode_pgm("P5\n2 2\n65535\n" + std::string(8, '\0')), io::FormatError);
    EXPECT_THROW(io::decode_pgm("P2\n1 1\n255\n0"), io::FormatError);
}

TEST(Images, RoundTripsWithinQuantization) {
    std::mt19937_64 rng(1);
    const Tensor t = random_tensor(13, 17, 1, rng, 0.0f, 1.0f);
    for (const Tensor& back : {io::decode_png(io::encode_png(t)), io::decode_pgm(io::encode_pgm(t))}) {
        ASSERT_TRUE(back.same_shape(t));
        EXPECT_LE(max_abs_diff(back, t), 0.5 / 255 + 1e-6);
        EXPECT_EQ(back, io::decode_pgm(io::encode_pgm(back)));
    }
    const Tensor pfm = random_tensor(9, 4, 1, rng, -100.0f, 100.0f);
    EXPECT_EQ(io::decode_pfm(io::encode_pfm(pfm)), pfm);
    EXPECT_EQ(io::quantize(-0.5f), 0);
    EXPECT_EQ(io::quantize(2.0f), 255);
}

TEST(Images, RejectsColourAndUnknownFormats) {
    std::mt19937_64 rng(2);
    const std::string rgb = io::encode_png(random_tensor(4, 4, 3, rng, 0.0f, 1.0f));
    try {
        io::decode_png(rgb);
        FAIL() << "colour PNG accepted";
    } catch (const io::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("RGB"), std::string::npos) << e.what();
    }
    EXPECT_THROW(io::decode_png(rgb.substr(0, rgb.size() / 2)), io::FormatError);
    EXPECT_THROW(io::decode_pfm("PF\n1 1\n-1.0\n" + std::string(12, '\0')), io::FormatError);

    TempDir dir;
    io::write_file_atomic(dir.path / "x.bmp", "BM....");
    EXPECT_THROW(io::load_image(dir.path / "x.bmp"), io::FormatError);
    EXPECT_THROW(io::load_image(dir.path / "missing.png"), io::FileError);
    EXPECT_THROW(io::save_image(dir.path / "x.jpg", Tensor(2, 2, 1)), io::FormatError);
    const Tensor g = random_tensor(5, 6, 1, rng, 0.0f, 1.0f);
    io::save_image(dir.path / "g.png", g);
    io::save_image(dir.path / "g.pgm", g);
    EXPECT_EQ(io::load_image(dir.path / "g.png"), io::load_image(dir.path / "g.pgm"));
}

TEST(MinutiaeFile, HeaderOnlyAndRoundTrip) {
    const MinutiaSet empty = io::parse_minutiae("# comment\n320\t480\n");
    EXPECT_EQ(empty.width, 320u);
    EXPECT_EQ(empty.height, 480u);
    EXPECT_TRUE(empty.empty());

    std::mt19937_64 rng(3);
    MinutiaSet s = random_minutiae(100, 500, 400, rng, false);
    const MinutiaSet back = io::parse_minutiae(io::format_minutiae(s));
    ASSERT_EQ(back.size(), 100u);
    EXPECT_EQ(back.width, s.width);
    for (std::size_t k = 0; k < 100; ++k) {
        EXPECT_NEAR(back.items[k].x, s.items[k].x, 5e-7);
        EXPECT_NEAR(back.items[k].y, s.items[k].y, 5e-7);
        EXPECT_NEAR(back.items[k].theta, s.items[k].theta, 5e-7);
        EXPECT_NEAR(back.items[k].quality, s.items[k].quality, 5e-7);
        EXPECT_EQ(back.items[k].kind, s.items[k].kind);
    }

    TempDir dir;
    io::write_minutiae(dir.path / "m.tsv", s);
    EXPECT_EQ(io::read_minutiae(dir.path / "m.tsv").size(), 100u);
}

TEST(MinutiaeFile, AngleWrapAndErrors) {
    const MinutiaSet w = io::parse_minutiae("10\t10\n1\t2\t9.42477796076938\tB\t0.5\n3\t4\t-3.14159265358979\tE\t1\n");
    EXPECT_NEAR(w.items[0].theta, std::numbers::pi, 1e-9);
    EXPECT_NEAR(std::fabs(w.items[1].theta), std::numbers::pi, 1e-9);
    EXPECT_GT(w.items[1].theta, -std::numbers::pi);
    EXPECT_EQ(w.items[0].kind, MinutiaKind::bifurcation);

    auto error_of = [](const std::string& text) {
        try {
            io::parse_minutiae(text);
        } catch (const io::FormatError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(error_of("10\t10\n1\t2\t0\tE\t1\n1\t2\t0\tX\t1\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of("10\t10\n1\t2\t0\tE\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("10\t10\n\n1\tabc\t0\tE\t1\n").find("line 3"), std::string::npos);
    EXPECT_FALSE(error_of("").empty());
    EXPECT_FALSE(error_of("1\t2\t3\n").empty());
}

TEST(WeightsFile, ByteLayout) {
    WeightStore s;
    s.insert("w", {{2, 2}, {1.0f, -2.0f, 0.5f, 3.0f}});
    const std::string bytes = io::serialize_weights(s);
    EXPECT_EQ(bytes.size(), 45u);
    EXPECT_EQ(bytes.substr(0, 6), "LEADW1");
    EXPECT_EQ(bytes[6], 1);
    EXPECT_EQ(bytes[10], 1);   // name length
    EXPECT_EQ(bytes[14], 'w');
    EXPECT_EQ(bytes[15], 2);   // rank
    EXPECT_EQ(bytes[24], 0);   // dtype
    const auto back = io::deserialize_weights(bytes);
    EXPECT_EQ(back.find("w")->shape, (std::vector<std::size_t>{2, 2}));
    EXPECT_EQ(back.find("w")->values, s.find("w")->values);
}

TEST(WeightsFile, CorruptionKinds) {
    WeightStore s;
    s.insert("w", {{2, 2}, {1.0f, -2.0f, 0.5f, 3.0f}});
    std::string bytes = io::serialize_weights(s);

    std::string flipped = bytes;
    flipped[30] ^= 0x10;
    EXPECT_THROW(io::deserialize_weights(flipped), io::CrcError);
    for (std::size_t cut : {std::size_t(12), std::size_t(20), std::size_t(30), bytes.size() - 5})
        EXPECT_THROW(io::deserialize_weights(bytes.substr(0, cut)), io::TruncationError) << cut;
    EXPECT_THROW(io::deserialize_weights("NOTAW1" + bytes.substr(6)), io::FormatError);

    // Duplicate names: splice a second copy of the entry and fix up count and checksum.
    const std::string entry = bytes.substr(10, bytes.size() - 14);
    std::string dup = bytes.substr(0, 10) + entry + entry;
    dup[6] = 2;
    const std::uint32_t crc = io::crc32_of(dup.data() + 10, dup.size() - 10);
    for (int b = 0; b < 4; ++b) dup.push_back(static_cast<char>((crc >> (8 * b)) & 0xFF));
    EXPECT_THROW(io::deserialize_weights(dup), io::DuplicateNameError);
}

TEST(WeightsFile, RandomStoreBitExact) {
    std::mt19937_64 rng(4);
    WeightStore s;
    for (int k = 0; k < 50; ++k) {
        std::vector<std::size_t> shape;
        const std::size_t rank = rng() % 5;
        for (std::size_t d = 0; d < rank; ++d) shape.push_back(1 + rng() % 4);
        std::vector<float> v(WeightTensor::element_count(shape));
        for (float& x : v) x = std::bit_cast<float>(static_cast<std::uint32_t>(rng()) & 0xBF7FFFFFu);
        s.insert("t" + std::to_string(k) + ".weight", {shape, v});
    }
    TempDir dir;
    io::write_weights(dir.path / "w.bin", s);
    const WeightStore back = io::read_weights(dir.path / "w.bin");
    ASSERT_EQ(back.size(), 50u);
    for (const auto& [name, t] : s) {
        EXPECT_EQ(back.find(name)->shape, t.shape);
        ASSERT_EQ(back.find(name)->values.size(), t.values.size());
        for (std::size_t k = 0; k < t.values.size(); ++k)
            EXPECT_EQ(std::bit_cast<std::uint32_t>(back.find(name)->values[k]), std::bit_cast<std::uint32_t>(t.values[k]));
    }
    const WeightStore model = random_weight_store(ModelConfig::leader_default(), 5);
    EXPECT_EQ(io::deserialize_weights(io::serialize_weights(model)).size(), model.size());
}

TEST(Csv, QuotingRoundTrip) {
    const std::vector<io::CsvRow> rows{{"a", "b,c", "say \"hi\""}, {"line\nbreak", "", "1.5"}};
    EXPECT_EQ(io::parse_csv(io::format_csv(rows)), rows);
    EXPECT_EQ(io::csv_field("plain"), "plain");
    EXPECT_EQ(io::csv_field("a,b"), "\"a,b\"");
    EXPECT_THROW(io::parse_csv("\"open"), io::FormatError);
    EXPECT_EQ(std::stod(io::csv_number(0.1 + 0.2)), 0.1 + 0.2);
}

TEST(ConfigFile, DefaultsOverridesAndErrors) {
    const io::RunConfig d = io::parse_run_config(nlohmann::json::object());
    EXPECT_EQ(d.cmr.delta, 4.0);
    EXPECT_EQ(d.postprocess.tau_q, 0.6);
    EXPECT_EQ(d.loss.alpha_p, 0.85);
    const io::RunConfig c = io::parse_run_config(nlohmann::json::parse(R"({"cmr":{"delta":5},"postprocess":{"tau_q":0.4}})"));
    EXPECT_EQ(c.cmr.delta, 5.0);
    EXPECT_EQ(c.cmr.beta, 2.0);
    EXPECT_EQ(c.postprocess.tau_q, 0.4);
    EXPECT_THROW(io::parse_run_config(nlohmann::json::parse(R"({"bogus":{}})")), io::FormatError);
    EXPECT_THROW(io::parse_run_config(nlohmann::json::parse(R"({"cmr":{"delta":"x"}})")), io::FormatError);
    EXPECT_THROW(io::parse_run_config(nlohmann::json::parse(R"({"cmr":{"lambda":1.5}})")), StructuralError);

    const ModelConfig shipped = io::read_model_config(fs::path(LEADER_SOURCE_DIR) / "config" / "leader_default.json");
    EXPECT_EQ(parameter_count(shipped), parameter_count(ModelConfig::leader_default()));
}

TEST(Svg, EscapesAndDraws) {
    EXPECT_EQ(io::xml_escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
    const std::string svg = io::unit_plot_svg({{"F1 <x>", {{0, 0}, {0.5, 1}, {1, 0.5}}}}, "recall", "precision", "PR");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("F1 &lt;x&gt;"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}
