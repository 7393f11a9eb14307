#include <gtest/gtest.h>
#include <tiffio.h>

#include <random>

#include "ctquant/ctquant.hpp"
#include "oracles.hpp"

using namespace ctquant;
namespace fs = std::filesystem;

namespace {

// Raw libtiff writer for 8-bit gray and RGB planes, bypassing the library's writer.
void write_raw_tiff(const fs::path& path, std::uint32_t h, std::uint32_t w, int spp, const std::vector<std::uint8_t>& data) {
    TIFF* t = TIFFOpen(path.c_str(), "w");
    ASSERT_NE(t, nullptr);
    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, w);
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, h);
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, spp);
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, spp == 1 ? PHOTOMETRIC_MINISBLACK : PHOTOMETRIC_RGB);
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(t, TIFFTAG_ROWSPERSTRIP, h);
    for (std::uint32_t y = 0; y < h; ++y) {
        auto* row = const_cast<std::uint8_t*>(data.data() + std::size_t{y} * w * spp);
        ASSERT_EQ(TIFFWriteScanline(t, row, y, 0), 1);
    }
    TIFFClose(t);
}

// Independent 16-bit decode through libtiff scanlines.
std::vector<std::uint16_t> raw_read_u16(const fs::path& path) {
    TIFF* t = TIFFOpen(path.c_str(), "r");
    std::uint32_t w = 0, h = 0;
    TIFFGetField(t, TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(t, TIFFTAG_IMAGELENGTH, &h);
    std::vector<std::uint16_t> out(std::size_t{w} * h);
    for (std::uint32_t y = 0; y < h; ++y) TIFFReadScanline(t, out.data() + std::size_t{y} * w, y, 0);
    TIFFClose(t);
    return out;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no Error thrown";
    return ErrorCode::io;
}

}  // namespace

TEST(TiffImport, StackOf200PlanesHasDims200) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    std::vector<GrayValue> plane(200 * 200, 7);
    for (int z = 0; z < 200; ++z) {
        char name[32];
        std::snprintf(name, sizeof name, "p%03d.tiff", z);
        write_tiff_plane(tmp.path() / "in" / name, plane, 200, 200);
    }
    const auto vol = import_tiff_stack(tmp.path() / "in", {64, 64, 64}, tmp.path() / "s.vol");
    EXPECT_EQ(vol.dims(), (Dims{200, 200, 200}));
    const auto store = ChunkStore::open(tmp.path() / "s.vol");
    EXPECT_EQ(store.meta().dims, (Dims{200, 200, 200}));
}

TEST(TiffImport, SingleZeroPlane) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    write_tiff_plane(tmp.path() / "in" / "a.tif", std::vector<GrayValue>(16, 0), 4, 4);
    const auto vol = import_tiff_stack(tmp.path() / "in", {64, 64, 64}, tmp.path() / "s.vol");
    EXPECT_EQ(vol.dims(), (Dims{1, 4, 4}));
    for (auto v : vol.voxels.values()) EXPECT_EQ(v, 0);
}

TEST(TiffImport, RoundTripMatchesIndependentDecode) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    std::mt19937_64 rng(5);
    std::vector<std::vector<std::uint16_t>> written;
    for (int z = 0; z < 7; ++z) {
        std::vector<GrayValue> plane(13 * 17);
        for (auto& v : plane) v = static_cast<GrayValue>(rng());
        const auto path = tmp.path() / "in" / ("s" + std::to_string(z) + ".tiff");
        write_tiff_plane(path, plane, 13, 17, z % 2 ? TiffCompression::deflate : TiffCompression::none);
        written.push_back(raw_read_u16(path));
        EXPECT_EQ(written.back(), plane);
    }
    const auto vol = import_tiff_stack(tmp.path() / "in", {3, 5, 4}, tmp.path() / "s.vol");
    const auto back = ChunkStore::open(tmp.path() / "s.vol").read_volume(2);
    EXPECT_EQ(back.voxels, vol.voxels);
    for (std::size_t z = 0; z < 7; ++z) {
        const auto p = vol.voxels.plane(z);
        EXPECT_TRUE(std::equal(p.begin(), p.end(), written[z].begin()));
    }
}

TEST(TiffImport, EightBitWidenedByValue) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    std::vector<std::uint8_t> data(6 * 5);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 8);
    write_raw_tiff(tmp.path() / "in" / "a.tif", 6, 5, 1, data);
    const auto vol = import_tiff_stack(tmp.path() / "in", {1, 6, 5}, tmp.path() / "s.vol");
    for (std::size_t i = 0; i < data.size(); ++i) EXPECT_EQ(vol.voxels[i], data[i]);
}

TEST(TiffImport, Errors) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "empty");
    EXPECT_EQ(code_of([&] { (void)import_tiff_stack(tmp.path() / "empty", {8, 8, 8}, tmp.path() / "a.vol"); }),
              ErrorCode::no_input);

    fs::create_directories(tmp.path() / "mixed");
    write_tiff_plane(tmp.path() / "mixed" / "a.tif", std::vector<GrayValue>(16), 4, 4);
    write_tiff_plane(tmp.path() / "mixed" / "b.tif", std::vector<GrayValue>(20), 4, 5);
    EXPECT_EQ(code_of([&] { (void)import_tiff_stack(tmp.path() / "mixed", {8, 8, 8}, tmp.path() / "b.vol"); }),
              ErrorCode::shape_mismatch);

    fs::create_directories(tmp.path() / "rgb");
    write_raw_tiff(tmp.path() / "rgb" / "a.tif", 4, 4, 3, std::vector<std::uint8_t>(48, 9));
    EXPECT_EQ(code_of([&] { (void)import_tiff_stack(tmp.path() / "rgb", {8, 8, 8}, tmp.path() / "c.vol"); }),
              ErrorCode::unsupported_format);
}

TEST(TiffImport, FilesOrderedByName) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    for (int v : {3, 1, 2}) {
        write_tiff_plane(tmp.path() / "in" / ("z" + std::to_string(v) + ".TIF"),
                         std::vector<GrayValue>(4, static_cast<GrayValue>(v)), 2, 2);
    }
    std::ofstream(tmp.path() / "in" / "notes.txt") << "skip";
    const auto vol = import_tiff_stack(tmp.path() / "in", {8, 8, 8}, tmp.path() / "s.vol");
    ASSERT_EQ(vol.dims().z, 3u);
    for (std::size_t z = 0; z < 3; ++z) EXPECT_EQ(vol.voxels(z, 0, 0), z + 1);
}

TEST(ChunkStore, PartialSliceReadsMatch) {
    oracle::TempDir tmp("ctq_vs");
    std::mt19937_64 rng(11);
    Volume<GrayValue> v({9, 7, 11});
    for (auto& x : v.values()) x = static_cast<GrayValue>(rng());
    auto store = ChunkStore::create(tmp.path() / "s.vol", v.dims(), {4, 3, 5}, 2.5);
    store.write_volume(v);
    const auto reopened = ChunkStore::open(tmp.path() / "s.vol");
    EXPECT_EQ(reopened.meta().voxel_size, 2.5);
    for (std::size_t b = 0; b < 9; ++b) {
        for (std::size_t e = b + 1; e <= 9; ++e) {
            const auto part = reopened.read_slices(b, e);
            ASSERT_EQ(part.dims(), (Dims{e - b, 7, 11}));
            for (std::size_t z = b; z < e; ++z) {
                const auto got = part.voxels.plane(z - b);
                const auto want = v.plane(z);
                ASSERT_TRUE(std::equal(got.begin(), got.end(), want.begin()));
            }
        }
    }
    EXPECT_THROW((void)reopened.read_slices(3, 10), Error);
    EXPECT_THROW((void)ChunkStore::create(tmp.path() / "t.vol", {2, 2, 2}, {3, 1, 1}, 1.0), Error);
}

TEST(Project, CreateLoadAndOverwrite) {
    oracle::TempDir tmp("ctq_vs");
    fs::create_directories(tmp.path() / "in");
    write_tiff_plane(tmp.path() / "in" / "a.tif", std::vector<GrayValue>(16, 3), 4, 4);
    Parameters params;
    params.mineralogy.bin_input = 512;
    params.segmentation.dilation_erosion_operations = {2, 1};
    const auto p = create_project(tmp.path() / "in", tmp.path() / "proj", false, params);
    for (const auto& d : p.subdirs()) EXPECT_TRUE(fs::is_directory(d)) << d;
    EXPECT_TRUE(fs::exists(p.gray_dir() / "a.tif"));
    EXPECT_EQ(to_json(load_parameters(p.parameters_file())), to_json(params));

    const auto loaded = load_project(tmp.path() / "proj");
    EXPECT_EQ(loaded.root, p.root);
    EXPECT_EQ(loaded.name, "proj");

    EXPECT_EQ(code_of([&] { (void)create_project(tmp.path() / "in", tmp.path() / "proj"); }), ErrorCode::already_exists);
    EXPECT_NO_THROW((void)create_project(tmp.path() / "in", tmp.path() / "proj", true));
    EXPECT_EQ(code_of([&] { (void)load_project(tmp.path() / "nothing"); }), ErrorCode::not_found);
}

TEST(HistogramTable, TwoRowsForOneLabel) {
    oracle::TempDir tmp("ctq_vs");
    write_histogram_table(tmp.path() / "h.csv", {RegionHistogram{7, {{100, 3}, {200, 5}}}});
    EXPECT_EQ(oracle::file_bytes(tmp.path() / "h.csv"), "label,gray_value,count\n7,100,3\n7,200,5\n");
}

TEST(HistogramTable, EmptyHasHeaderOnly) {
    oracle::TempDir tmp("ctq_vs");
    write_histogram_table(tmp.path() / "h.csv", {});
    EXPECT_EQ(oracle::file_bytes(tmp.path() / "h.csv"), "label,gray_value,count\n");
    EXPECT_TRUE(read_histogram_table(tmp.path() / "h.csv").empty());
}

TEST(HistogramTable, RandomRoundTripAndDeterministicBytes) {
    oracle::TempDir tmp("ctq_vs");
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<RegionHistogram> rows;
        std::set<Label> used;
        const int n = static_cast<int>(rng() % 6) + 1;
        while (static_cast<int>(used.size()) < n) used.insert(static_cast<Label>(rng() % 1000 + 1));
        for (Label l : used) {
            RegionHistogram h{l, {}};
            const int k = static_cast<int>(rng() % 50) + 1;
            for (int i = 0; i < k; ++i) h.counts[static_cast<GrayValue>(rng())] += rng() % 100000 + 1;
            rows.push_back(h);
        }
        std::vector<RegionHistogram> shuffled = rows;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        write_histogram_table(tmp.path() / "a.csv", rows);
        write_histogram_table(tmp.path() / "b.csv", shuffled);
        EXPECT_EQ(oracle::file_bytes(tmp.path() / "a.csv"), oracle::file_bytes(tmp.path() / "b.csv"));
        EXPECT_EQ(read_histogram_table(tmp.path() / "a.csv"), rows);
    }
}

TEST(Tables, LabelListAndGradientRoundTrip) {
    oracle::TempDir tmp("ctq_vs");
    LabelList list;
    list[0] = 4;
    list[6] = 12;
    write_labellist_csv(tmp.path() / "l.csv", list);
    EXPECT_EQ(read_labellist_csv(tmp.path() / "l.csv"), list);

    GradientProfile g{3, {{1, 150.0, 10, 1500}, {2, 120.5, 4, 482}}};
    write_gradient_csv(tmp.path() / "g.csv", {g});
    const auto back = read_gradient_csv(tmp.path() / "g.csv");
    ASSERT_EQ(back.size(), 1u);
    ASSERT_EQ(back[0].layers.size(), 2u);
    EXPECT_EQ(back[0].layers[1].voxel_count, 4u);
    EXPECT_EQ(back[0].layers[1].gray_sum, 482u);
}

TEST(Parameters, DefaultsValidateAndRoundTrip) {
    Parameters p;
    EXPECT_NO_THROW(validate(p));
    const auto again = parse_parameters_yaml(parameters_to_yaml(p));
    EXPECT_EQ(to_json(again), to_json(p));
    std::size_t keys = 0;
    for (auto c : {ParamCategory::mineralogy, ParamCategory::property_extraction, ParamCategory::segmentation,
                   ParamCategory::manual_segmentation}) {
        keys += parameter_keys(c).size();
    }
    EXPECT_EQ(to_json(p).size(), keys);
}

TEST(Parameters, RandomRoundTrip) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Parameters p;
        for (auto& d : p.mineralogy.density) d = 0.5 + 5.0 * u(rng);
        double g = 100.0;
        for (auto& m : p.mineralogy.max_grey) {
            g += 1.0 + std::floor(10000.0 * u(rng));
            m = std::min(g, 65535.0);
        }
        if (p.mineralogy.max_grey[4] <= p.mineralogy.max_grey[3]) p.mineralogy.max_grey[4] = std::nullopt;
        p.mineralogy.bin_input = 2 + static_cast<int>(rng() % 1000);
        p.mineralogy.prominence = u(rng);
        p.mineralogy.enable_pvb = rng() % 2;
        p.extraction.feret_angle = 1.0 + 89.0 * u(rng);
        p.extraction.num_threads = static_cast<int>(rng() % 8) + 1;
        p.segmentation.manual_thresholding = static_cast<std::int64_t>(rng() % 65536);
        p.segmentation.dilation_erosion_operations.clear();
        for (int i = 0; i < static_cast<int>(rng() % 4); ++i) p.segmentation.dilation_erosion_operations.push_back(1 + static_cast<int>(rng() % 2));
        ASSERT_NO_THROW(validate(p));
        EXPECT_EQ(to_json(parse_parameters_yaml(parameters_to_yaml(p))), to_json(p));
    }
}

TEST(Parameters, ValidationNamesEveryBadKey) {
    Parameters p;
    p.mineralogy.density[1] = 0.0;
    p.mineralogy.max_grey[2] = 100.0;  // not above B
    p.mineralogy.bin_input = 1;
    p.extraction.num_threads = 0;
    p.extraction.start_slice = 9;
    p.extraction.end_slice = 3;
    try {
        validate(p);
        FAIL() << "expected validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
        const auto& f = e.fields();
        for (const char* key : {"DensityB", "MaxGreyValueC", "binInput", "num_threads", "start_slice", "end_slice"}) {
            EXPECT_NE(std::find(f.begin(), f.end(), key), f.end()) << key;
        }
    }
}

TEST(Parameters, YamlErrorsAndAbsentClass) {
    EXPECT_EQ(code_of([] { (void)parse_parameters_yaml("bogus_key: 3\n"); }), ErrorCode::validation);
    EXPECT_EQ(code_of([] { (void)parse_parameters_yaml("binInput: hello\n"); }), ErrorCode::validation);
    const auto p = parse_parameters_yaml("MaxGreyValueE: null\nbinInput: 128\n");
    EXPECT_FALSE(p.mineralogy.max_grey[4].has_value());
    EXPECT_EQ(p.mineralogy.bin_input, 128);
    EXPECT_EQ(p.mineralogy.max_grey[0], 19660.0);
}
