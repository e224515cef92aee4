#include <gtest/gtest.h>

#include <filesystem>

#include "imafd/render.hpp"
#include "imafd/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace imafd;
using namespace imafd::render;

TEST(Render, SolidWater) {
    const auto img = render_class_map(ClassMap(3, 2, Label::Water));
    for (const auto& c : img.values()) EXPECT_EQ(c, (Rgb{0, 0, 255}));
}

TEST(Render, FourColours) {
    ClassMap m(2, 2);
    m[0] = Label::Land;
    m[1] = Label::Water;
    m[2] = Label::Cloud;
    m[3] = Label::Invalid;
    const auto img = render_class_map(m);
    EXPECT_EQ(img[0], (Rgb{0, 160, 0}));
    EXPECT_EQ(img[1], (Rgb{0, 0, 255}));
    EXPECT_EQ(img[2], (Rgb{255, 255, 0}));
    EXPECT_EQ(img[3], (Rgb{0, 0, 0}));
}

TEST(Render, UnknownLabelIsAnError) {
    ClassMap m(1, 1);
    m[0] = static_cast<Label>(7);
    EXPECT_THROW(render_class_map(m), InputError);
}

TEST(Render, PaletteIsInjective) {
    for (std::size_t a = 0; a < kPalette.size(); ++a)
        for (std::size_t b = a + 1; b < kPalette.size(); ++b) EXPECT_NE(kPalette[a], kPalette[b]);
}

TEST(RenderConfidence, LowConfidenceIsLightened) {
    ClassMap m(1, 3, Label::Water);
    m[2] = Label::Invalid;
    ConfidenceMap conf(1, 3, 1.0);
    conf[1] = 0.5;
    conf[2] = 0.0;
    const auto img = render_confidence(conf, m, 0.8);
    EXPECT_EQ(img[0], (Rgb{0, 0, 255}));
    EXPECT_EQ(img[1], (Rgb{128, 128, 255}));
    EXPECT_EQ(img[2], (Rgb{0, 0, 0}));
    EXPECT_EQ(render_confidence(conf, m, 0.0), render_class_map(m));
    EXPECT_THROW(render_confidence(conf, m, 2.0), ConfigError);
}

TEST(RenderOverlay, GrayWithBlueChanges) {
    BinaryMap mask(3, 3, 0);
    const auto empty = render_change_overlay(mask);
    for (const auto& c : empty.values()) EXPECT_EQ(c, (Rgb{128, 128, 128}));
    mask[4] = 1;
    const auto img = render_change_overlay(mask);
    std::size_t blue = 0;
    for (const auto& c : img.values()) blue += c == Rgb{0, 0, 255};
    EXPECT_EQ(blue, 1u);
    EXPECT_EQ(img[4], (Rgb{0, 0, 255}));
}

TEST(Png, RoundTripAndStableBytes) {
    const auto dir = fs::temp_directory_path() / "imafd_render";
    fs::create_directories(dir);
    ClassMap m(5, 7, Label::Land);
    m(2, 3) = Label::Water;
    m(4, 6) = Label::Cloud;
    const auto img = render_class_map(m);
    write_png(dir / "a.png", img);
    write_png(dir / "b.png", img);
    EXPECT_EQ(read_png(dir / "a.png"), img);
    EXPECT_EQ(read_bytes(dir / "a.png"), read_bytes(dir / "b.png"));
    EXPECT_THROW(read_png(dir / "missing.png"), InputError);
}
