#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cipred/cohort/tables.hpp"
#include "cipred/cohort/volume_io.hpp"
#include "cipred/core/rng.hpp"

using namespace cipred;
using namespace cipred::cohort;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("cipred_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

Volume random_volume(int nx, int ny, int nz, std::uint64_t seed) {
    Volume v;
    v.nx = nx; v.ny = ny; v.nz = nz;
    Rng rng(seed);
    v.sx = 0.25 + rng.uniform();
    v.sy = 0.25 + rng.uniform();
    v.sz = 0.25 + rng.uniform();
    v.voxels.resize(static_cast<std::size_t>(nx) * ny * nz);
    for (auto& x : v.voxels) x = static_cast<float>(rng.normal());
    return v;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out << bytes;
}

}  // namespace

TEST_CASE("tiny zero volume round trips exactly") {
    TempDir tmp;
    Volume v;
    v.nx = v.ny = v.nz = 2;
    v.voxels.assign(8, 0.0f);
    write_volume(v, tmp.file("z.rvol"));
    const Volume back = read_volume(tmp.file("z.rvol"));
    CHECK(back.nx == 2);
    CHECK(back.voxels == v.voxels);
    CHECK(back.sx == 1.0);
}

TEST_CASE("random volumes round trip bytewise") {
    TempDir tmp;
    for (int i = 0; i < 100; ++i) {
        Rng dims_rng(1000 + i);
        const Volume v = random_volume(1 + dims_rng.uniform_u64(6),
                                       1 + dims_rng.uniform_u64(6),
                                       1 + dims_rng.uniform_u64(6), 5000 + i);
        write_volume(v, tmp.file("v.rvol"));
        const Volume back = read_volume(tmp.file("v.rvol"));
        CHECK(back.nx == v.nx);
        CHECK(back.ny == v.ny);
        CHECK(back.nz == v.nz);
        CHECK(back.sx == v.sx);
        CHECK(back.sy == v.sy);
        CHECK(back.sz == v.sz);
        CHECK(back.voxels == v.voxels);
        // Writing the decoded value again yields identical bytes.
        write_volume(back, tmp.file("v2.rvol"));
        CHECK(read_bytes(tmp.file("v.rvol")) == read_bytes(tmp.file("v2.rvol")));
    }
}

TEST_CASE("file size is header plus one float per voxel") {
    TempDir tmp;
    Volume v;
    v.nx = v.ny = v.nz = 2;
    v.voxels.assign(8, 0.0f);
    write_volume(v, tmp.file("size.rvol"));
    const std::string bytes = read_bytes(tmp.file("size.rvol"));
    const std::string header = "RVOL1\n2 2 2\n1 1 1\n";
    CHECK(bytes.size() == header.size() + 8 * 4);
    CHECK(bytes.substr(0, header.size()) == header);
}

TEST_CASE("spacing is recorded exactly") {
    TempDir tmp;
    Volume v;
    v.nx = v.ny = v.nz = 1;
    v.sx = v.sy = v.sz = 0.5;
    v.voxels.assign(1, 3.0f);
    write_volume(v, tmp.file("sp.rvol"));
    const Volume back = read_volume(tmp.file("sp.rvol"));
    CHECK(back.sx == 0.5);
    CHECK(back.sy == 0.5);
    CHECK(back.sz == 0.5);
}

TEST_CASE("bad magic, truncation and NaN voxels are rejected") {
    TempDir tmp;
    Volume v = random_volume(2, 2, 2, 9);
    write_volume(v, tmp.file("ok.rvol"));
    std::string bytes = read_bytes(tmp.file("ok.rvol"));

    std::string bad_magic = bytes;
    bad_magic[3] = 'X';  // RVOL1 -> RVOX1
    write_bytes(tmp.file("bad.rvol"), bad_magic);
    CHECK_THROWS_AS(read_volume(tmp.file("bad.rvol")), FormatError);

    write_bytes(tmp.file("short.rvol"), bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_volume(tmp.file("short.rvol")), TruncationError);

    std::string nan_bytes = bytes;
    // Overwrite the first voxel with a quiet NaN pattern.
    const std::uint32_t qnan = 0x7fc00000u;
    std::memcpy(nan_bytes.data() + (bytes.size() - 8 * 4), &qnan, 4);
    write_bytes(tmp.file("nan.rvol"), nan_bytes);
    CHECK_THROWS_AS(read_volume(tmp.file("nan.rvol")), ValidationError);

    CHECK_THROWS_AS(read_volume(tmp.file("missing.rvol")), IoError);
}

TEST_CASE("image cache files round trip") {
    TempDir tmp;
    Image2d img;
    img.h = 3;
    img.w = 5;
    img.v = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    write_image(img, tmp.file("a.rimg"));
    const Image2d back = read_image(tmp.file("a.rimg"));
    CHECK(back.h == 3);
    CHECK(back.w == 5);
    CHECK(back.v == img.v);
}

TEST_CASE("clinical table parses, validates and rejects bad rows") {
    TempDir tmp;
    const std::string header =
        "subject_id,center,language,sex,age_at_ci,age_at_mri,age_at_ha,pta_left,"
        "pta_right,preop_score\n";
    write_bytes(tmp.file("c.csv"),
                header + "s1,A,english,0,24,20,10,95,90,75\n"
                         "s2,B,english,1,30,28,5,100,105,101\n"
                         "s3,C,cantonese,0,18,16,12,110,100,15\n");
    const auto records = read_clinical_table(tmp.file("c.csv"));
    REQUIRE(records.size() == 3);
    CHECK(records[0].subject_id == "s1");
    CHECK(records[1].center == Center::B);
    CHECK(records[2].language == Language::cantonese);
    CHECK(records[2].preop_score == 15.0);

    write_bytes(tmp.file("dup.csv"), header + "s1,A,english,0,24,20,10,95,90,75\n"
                                              "s1,A,english,0,25,21,11,96,91,76\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(read_clinical_table(tmp.file("dup.csv"))),
                         doctest::Contains("s1"), ValidationError);

    write_bytes(tmp.file("range.csv"), header + "s1,A,english,0,24,20,10,135,90,75\n");
    CHECK_THROWS_AS(static_cast<void>(read_clinical_table(tmp.file("range.csv"))),
                    ValidationError);

    write_bytes(tmp.file("col.csv"), "subject_id,center\ns1,A\n");
    CHECK_THROWS_AS(static_cast<void>(read_clinical_table(tmp.file("col.csv"))),
                    FormatError);

    write_bytes(tmp.file("age.csv"), header + "s1,A,english,0,abc,20,10,95,90,75\n");
    CHECK_THROWS_AS(static_cast<void>(read_clinical_table(tmp.file("age.csv"))),
                    FormatError);
}

TEST_CASE("scores table groups, sorts and enforces two observations") {
    TempDir tmp;
    write_bytes(tmp.file("s.csv"), "subject_id,time_months,score\n"
                                   "s1,12,30\n"
                                   "s1,0,10\n"
                                   "s1,6,20\n"
                                   "s2,0,5\n"
                                   "s2,6,7\n");
    const auto series = read_scores_table(tmp.file("s.csv"));
    REQUIRE(series.size() == 2);
    CHECK(series[0].subject_id == "s1");
    REQUIRE(series[0].observations.size() == 3);
    CHECK(series[0].observations[0].time_months == 0);
    CHECK(series[0].observations[1].time_months == 6);
    CHECK(series[0].observations[2].time_months == 12);

    write_bytes(tmp.file("one.csv"), "subject_id,time_months,score\ns1,0,10\n");
    CHECK_THROWS_AS(static_cast<void>(read_scores_table(tmp.file("one.csv"))),
                    ValidationError);

    write_bytes(tmp.file("dup2.csv"), "subject_id,time_months,score\ns1,0,10\ns1,0,11\n");
    CHECK_THROWS_AS(static_cast<void>(read_scores_table(tmp.file("dup2.csv"))),
                    ValidationError);
}

TEST_CASE("cohort assembly joins, excludes and reports") {
    TempDir tmp;
    fs::create_directories(tmp.path / "volumes");
    std::vector<ClinicalRecord> records;
    std::vector<LongitudinalSeries> series;
    for (int i = 0; i < 5; ++i) {
        ClinicalRecord r;
        r.subject_id = "s" + std::to_string(i);
        r.center = Center::A;
        r.pta_left = r.pta_right = 95;
        records.push_back(r);
        LongitudinalSeries s;
        s.subject_id = r.subject_id;
        s.observations = {{0, 1.0}, {6, 2.0}};
        series.push_back(s);
        if (i != 3) {  // subject s3 has no volume -> excluded
            Volume v;
            v.nx = v.ny = v.nz = 2;
            v.voxels.assign(8, static_cast<float>(i));
            write_volume(v, (tmp.path / "volumes" / (r.subject_id + ".rvol")).string());
        }
    }

    AssembleReport report;
    const auto cohort = assemble_cohort(records, series, (tmp.path / "volumes").string(),
                                        &report);
    CHECK(cohort.subjects.size() == 4);
    REQUIRE(report.missing_volume.size() == 1);
    CHECK(report.missing_volume[0] == "s3");
    // Join accounting: output + exclusions covers every clinical record.
    CHECK(cohort.subjects.size() + report.missing_volume.size() +
              report.missing_series.size() ==
          records.size());

    // Disjoint id sets are fatal.
    std::vector<LongitudinalSeries> other;
    LongitudinalSeries s;
    s.subject_id = "unrelated";
    s.observations = {{0, 1.0}, {6, 2.0}};
    other.push_back(s);
    CHECK_THROWS_AS(
        static_cast<void>(assemble_cohort(records, other, (tmp.path / "volumes").string())),
        ValidationError);
}
