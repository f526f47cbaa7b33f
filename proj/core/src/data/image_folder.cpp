#include "harmony/data/image_folder.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "harmony/data/image_io.hpp"
#include "harmony/error.hpp"

namespace fs = std::filesystem;

namespace harmony {
namespace {

bool hidden(const fs::path& p) {
  const auto name = p.filename().string();
  return !name.empty() && name.front() == '.';
}

std::string default_tag(const fs::path& root) {
  return "folder:" + fs::weakly_canonical(root).filename().string();
}

}  // namespace

Dataset load_image_folder(const fs::path& root, const std::optional<fs::path>& manifest,
                          const std::string& tag) {
  if (!fs::is_directory(root)) throw DatasetError("dataset root '" + root.string() + "' not found");

  std::vector<std::string> class_names;
  std::vector<std::pair<std::string, std::string>> entries;  // (relative path, class)

  if (manifest) {
    std::ifstream in(*manifest);
    if (!in) throw IoError("cannot open manifest '" + manifest->string() + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw DatasetError("manifest '" + manifest->string() + "' line " +
                           std::to_string(line_no) + " lacks a TAB separator");
      }
      std::string cls = line.substr(tab + 1);
      if (std::find(class_names.begin(), class_names.end(), cls) == class_names.end()) {
        class_names.push_back(cls);
      }
      entries.emplace_back(line.substr(0, tab), std::move(cls));
    }
  } else {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && !hidden(e.path())) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<std::string> empty_classes;
    for (const auto& dir : dirs) {
      const std::string cls = dir.filename().string();
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && !hidden(e.path())) files.push_back(e.path());
      }
      if (files.empty()) {
        empty_classes.push_back(cls);
        continue;
      }
      std::sort(files.begin(), files.end());
      class_names.push_back(cls);
      for (const auto& f : files) {
        entries.emplace_back(fs::relative(f, root).generic_string(), cls);
      }
    }
    if (!empty_classes.empty()) {
      std::string list;
      for (const auto& c : empty_classes) list += (list.empty() ? "" : ", ") + c;
      throw DatasetError("empty class directories under '" + root.string() + "': " + list);
    }
  }
  if (class_names.empty()) throw DatasetError("no classes found under '" + root.string() + "'");

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < class_names.size(); ++i) index[class_names[i]] = static_cast<int>(i);

  std::vector<LabeledExample> examples;
  examples.reserve(entries.size());
  for (const auto& [rel, cls] : entries) {
    ImageTensor img = read_image(root / rel);
    examples.push_back({std::move(img), index.at(cls), rel});
  }
  return Dataset(std::move(examples), std::move(class_names), Split::kAll,
                 tag.empty() ? default_tag(root) : tag);
}

void export_image_folder(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  std::ofstream manifest(root / "manifest.tsv");
  if (!manifest) throw IoError("cannot write manifest under '" + root.string() + "'");
  for (const auto& ex : dataset) {
    const std::string& cls = dataset.class_names()[static_cast<std::size_t>(ex.label)];
    std::string file = ex.id;
    std::replace(file.begin(), file.end(), '/', '_');
    const std::string rel = cls + "/" + file + ".png";
    write_png(root / rel, ex.image);
    manifest << rel << '\t' << cls << '\n';
  }
}

}  // namespace harmony
