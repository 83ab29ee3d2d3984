#include <gtest/gtest.h>

#include <filesystem>

#include "zsseg/checkpoint.hpp"
#include "zsseg/io.hpp"

using namespace zsseg;

namespace {

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Container, EncodeDecodeRoundTrip) {
    Container c;
    c.arrays.push_back(NamedArray::from_f64("w", {2, 3}, {1, 2, 3, 4, 5, -6.5}));
    c.arrays.push_back(NamedArray::from_u8("m", {4}, {0, 1, 2, 255}));
    c.metadata["k"] = "v";
    const auto bytes = encode_container(c);
    const Container d = decode_container(bytes);
    EXPECT_EQ(d.get("w").as_f64(), c.get("w").as_f64());
    EXPECT_EQ(d.get("w").shape, (std::vector<std::int64_t>{2, 3}));
    EXPECT_EQ(d.get("m").as_u8(), c.get("m").as_u8());
    EXPECT_EQ(d.meta("k"), "v");
    EXPECT_EQ(encode_container(d), bytes);
}

TEST(Container, HeaderIsLittleEndianLengthPlusJson) {
    Container c;
    c.arrays.push_back(NamedArray::from_f64("a", {1}, {1.0}));
    const auto b = encode_container(c);
    std::uint64_t n = 0;
    for (int i = 7; i >= 0; --i) n = (n << 8) | b[i];
    ASSERT_LT(8 + n, b.size() + 1);
    const std::string header(b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(n));
    EXPECT_NE(header.find("\"F64\""), std::string::npos);
    EXPECT_EQ(b.size(), 8 + n + 8);
}

TEST(Container, RejectsCorruptInput) {
    EXPECT_THROW(decode_container({1, 2, 3}), FormatError);
    Container c;
    c.arrays.push_back(NamedArray::from_f64("a", {2}, {1.0, 2.0}));
    auto b = encode_container(c);
    b.pop_back();
    EXPECT_THROW(decode_container(b), FormatError);
    EXPECT_THROW(NamedArray::from_f64("x", {3}, {1.0}), FormatError);
    EXPECT_THROW(c.get("missing"), FormatError);
    EXPECT_THROW(c.get("a").as_u8(), FormatError);
}

TEST(Checkpoint, SaveLoadRoundTripIsBitExact) {
    NetworkConfig cfg;
    cfg.image_size = 16;
    cfg.num_classes = 3;
    SegmentationNet net(cfg);
    Rng rng(4);
    net.init(rng);
    const std::string path = temp_file("zsseg_ckpt_test.safetensors");
    save_checkpoint(path, net, 17, "prior");
    std::int64_t step = 0;
    const auto back = load_checkpoint<SegmentationNet>(path, &step);
    EXPECT_EQ(step, 17);
    EXPECT_EQ(back.config, cfg);
    EXPECT_EQ(parameter_hash(back), parameter_hash(net));
    EXPECT_EQ(checkpoint_info(load_container(path)).role, "prior");
    std::filesystem::remove(path);
}

TEST(Checkpoint, ShapeMismatchIsAnError) {
    NetworkConfig a, b;
    a.image_size = b.image_size = 16;
    b.feature_channels = 8;
    SegmentationNet na(a), nb(b);
    EXPECT_THROW(from_container(to_container(na, 0, "x"), nb), FormatError);
}

TEST(TextFiles, WriteRead) {
    const std::string p = temp_file("zsseg_text_test.txt");
    write_text_file(p, "a\nb");
    EXPECT_EQ(read_text_file(p), "a\nb");
    std::filesystem::remove(p);
    EXPECT_ANY_THROW(read_text_file(p));
}
