#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "zrnorm/corpus_io.hpp"
#include "zrnorm/lm_tasks_types.hpp"

using namespace zrnorm;

namespace {

FeatureArchive small_archive() {
    FeatureArchive a(3, 10000);
    a.add("u1", Matrix{{1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}});
    a.add("u2", Matrix{{-1.5, 0.0, 1e-3}});
    return a;
}

std::string serialize(const FeatureArchive& a) {
    std::ostringstream s(std::ios::binary);
    write_archive(a, s);
    return s.str();
}

FormatError::Kind read_error_kind(const std::string& bytes) {
    std::istringstream in(bytes, std::ios::binary);
    try {
        read_archive(in);
    } catch (const FormatError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a FormatError";
    return FormatError::Kind::io;
}

} // namespace

TEST(Archive, RoundTripIsExactAfterFloatRounding) {
    const auto a = small_archive();
    std::istringstream in(serialize(a), std::ios::binary);
    const auto b = read_archive(in);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b.dim(), 3u);
    EXPECT_EQ(b.frame_period_us(), 10000u);
    EXPECT_EQ(b[0].id, "u1");
    for (std::size_t i = 0; i < a[0].frames.data().size(); ++i)
        EXPECT_EQ(b[0].frames.data()[i], static_cast<double>(static_cast<float>(a[0].frames.data()[i])));
    // Second round trip is the identity.
    EXPECT_EQ(serialize(b), serialize(a));
}

TEST(Archive, HeaderIsLittleEndian) {
    const std::string bytes = serialize(small_archive());
    ASSERT_GE(bytes.size(), 24u);
    EXPECT_EQ(bytes.substr(0, 4), "ZRFA");
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u); // version
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u); // dim
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 0x10u); // 10000 = 0x2710
    EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 0x27u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2u); // count
}

TEST(Archive, RejectsBadMagicTruncationAndVersion) {
    std::string bytes = serialize(small_archive());
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_EQ(read_error_kind(bad), FormatError::Kind::bad_magic);
    EXPECT_EQ(read_error_kind(bytes.substr(0, bytes.size() - 2)), FormatError::Kind::truncated);
    EXPECT_EQ(read_error_kind(bytes.substr(0, 10)), FormatError::Kind::truncated);
    std::string v2 = bytes;
    v2[4] = 2;
    EXPECT_EQ(read_error_kind(v2), FormatError::Kind::version_mismatch);
}

TEST(Archive, RejectsDuplicateIdsAndDimensionMismatch) {
    FeatureArchive a(2);
    a.add("x", Matrix{{1.0, 2.0}});
    EXPECT_THROW(a.add("x", Matrix{{1.0, 2.0}}), FormatError);
    EXPECT_THROW(a.add("y", Matrix{{1.0, 2.0, 3.0}}), DimensionMismatch);
    EXPECT_THROW(a.add("z", Matrix(0, 2)), InvalidArgument);

    // A duplicate id inside a serialized stream is reported as such.
    FeatureArchive b(2);
    b.add("x", Matrix{{1.0, 2.0}});
    b.add("y", Matrix{{1.0, 2.0}});
    std::string bytes = serialize(b);
    const auto pos = bytes.rfind('y');
    bytes[pos] = 'x';
    EXPECT_EQ(read_error_kind(bytes), FormatError::Kind::duplicate_id);
}

TEST(Archive, ProvenanceSidecarRoundTrips) {
    const auto dir = std::filesystem::temp_directory_path() / "zrnorm_corpus_test";
    std::filesystem::remove_all(dir);
    auto a = small_archive();
    a.provenance.normalization = Provenance::Normalization::speaker;
    save_archive(a, dir / "a.zrfa");
    const auto b = load_archive(dir / "a.zrfa");
    EXPECT_EQ(b.provenance.normalization, Provenance::Normalization::speaker);
    EXPECT_TRUE(b == read_archive(dir / "a.zrfa"));
    std::filesystem::remove(provenance_path(dir / "a.zrfa"));
    EXPECT_EQ(load_archive(dir / "a.zrfa").provenance.normalization, Provenance::Normalization::none);
    std::filesystem::remove_all(dir);
}

TEST(Manifest, ParsesAndRoundTrips) {
    std::istringstream in("utt_id,speaker_id,gender,num_frames\nu1,s1,F,2\n\nu2,s2,M,1\r\n");
    const auto m = read_manifest(in);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at("u2").gender, Gender::M);
    EXPECT_EQ(m.at("u1").num_frames, 2u);
    std::ostringstream out;
    write_manifest(m, out);
    EXPECT_EQ(out.str(), "utt_id,speaker_id,gender,num_frames\nu1,s1,F,2\nu2,s2,M,1\n");
    EXPECT_NO_THROW(m.validate_against(small_archive()));
}

TEST(Manifest, ReportsLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_manifest(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 9999;
    };
    const std::string h = "utt_id,speaker_id,gender,num_frames\n";
    EXPECT_EQ(line_of("bad header\n"), 1u);
    EXPECT_EQ(line_of(h + "u1,s1,F,2\nu2,s1,X,3\n"), 3u);
    EXPECT_EQ(line_of(h + "u1,s1,F\n"), 2u);
    EXPECT_EQ(line_of(h + "u1,s1,F,-3\n"), 2u);
    EXPECT_EQ(line_of(h + "u1,s1,F,2\nu1,s2,M,2\n"), 3u);
    EXPECT_EQ(line_of(""), 0u);
}

TEST(Manifest, ValidateAgainstArchiveChecksFrameCounts) {
    Manifest m;
    m.add({"u1", "s1", Gender::F, 3});
    EXPECT_THROW(m.validate_against(small_archive()), InvalidArgument);
    Manifest missing;
    missing.add({"nope", "s1", Gender::F, 1});
    EXPECT_THROW(missing.validate_against(small_archive()), InvalidArgument);
}

TEST(Alignment, ParsesTilingSegments) {
    std::istringstream in("u1 a 0 1\nu1 b 1 2\nu2 sil 0 1\n");
    const auto a = read_alignment(in);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a.at("u1").num_frames(), 2u);
    EXPECT_EQ(a.at("u1").frame_labels(), (std::vector<std::string>{"a", "b"}));
    EXPECT_NO_THROW(a.validate_against(small_archive()));
    std::ostringstream out;
    write_alignment(a, out);
    EXPECT_EQ(out.str(), "u1 a 0 1\nu1 b 1 2\nu2 sil 0 1\n");
}

TEST(Alignment, RejectsGapsOverlapsAndBadStarts) {
    auto kind = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_alignment(in);
        } catch (const AlignmentError& e) {
            return e.kind();
        }
        ADD_FAILURE() << "expected AlignmentError for: " << text;
        return AlignmentError::Kind::gap;
    };
    EXPECT_EQ(kind("u1 a 0 2\nu1 b 3 4\n"), AlignmentError::Kind::gap);
    EXPECT_EQ(kind("u1 a 0 2\nu1 b 1 4\n"), AlignmentError::Kind::overlap);
    EXPECT_EQ(kind("u1 a 1 2\n"), AlignmentError::Kind::bad_start);
    EXPECT_EQ(kind("u1 a 0 0\n"), AlignmentError::Kind::empty_segment);
    std::istringstream bad_fields("u1 a 0\n");
    EXPECT_THROW(read_alignment(bad_fields), ParseError);
}

TEST(Alignment, ValidateAgainstArchiveAndManifest) {
    std::istringstream in("u1 a 0 3\n");
    const auto a = read_alignment(in);
    try {
        a.validate_against(small_archive());
        FAIL() << "expected length mismatch";
    } catch (const AlignmentError& e) {
        EXPECT_EQ(e.kind(), AlignmentError::Kind::length_mismatch);
    }
    Manifest m;
    EXPECT_THROW(a.validate_against(m), AlignmentError);
}

TEST(TaskFiles, PairsAndSimilarityRoundTrip) {
    std::vector<TaskPair> pairs{{"p1", "a", "b"}, {"p2", "c", "d"}};
    std::stringstream s;
    write_pairs(pairs, s);
    const auto back = read_pairs(s);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].neg_utt_id, "d");

    std::vector<SimiItem> items{{"q1", "a", "b", 0.125}, {"q2", "c", "d", 1.0 / 3.0}};
    std::stringstream t;
    write_simi(items, t);
    const auto simi = read_simi(t);
    ASSERT_EQ(simi.size(), 2u);
    EXPECT_EQ(simi[1].human_score, 1.0 / 3.0);

    std::istringstream bad("pair_id,utt_a,utt_b,human_score\nq,a,b,zz\n");
    EXPECT_THROW(read_simi(bad), ParseError);
    std::istringstream no_header("p1,a,b\n");
    EXPECT_THROW(read_pairs(no_header), ParseError);
}
