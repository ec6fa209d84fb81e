#include "fedsim/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <unordered_map>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// Builds the split from per-user interaction lists already in timestamp
// order (stable on ties). Users with <3 interactions are dropped; the
// survivors keep their original dense ids, so callers must pass lists that
// are all long enough, or accept re-indexing. Here we drop without
// re-indexing gaps by compacting user ids afterwards.
InteractionDataset build_split(std::vector<std::vector<int>> per_user, int num_items) {
    InteractionDataset ds;
    ds.num_items = num_items;
    for (auto& items : per_user) {
        if (static_cast<int>(items.size()) < 3) {
            ++ds.dropped_users;
            continue;
        }
        std::vector<int> tr(items.begin(), items.end() - 2);
        int val = items[items.size() - 2];
        int test = items.back();
        std::unordered_set<int> hist(items.begin(), items.end());
        ds.num_interactions += static_cast<long long>(items.size());
        ds.train.push_back(std::move(tr));
        ds.validation.push_back(val);
        ds.test.push_back(test);
        ds.history.push_back(std::move(hist));
    }
    ds.num_users = static_cast<int>(ds.train.size());
    if (ds.num_users == 0) {
        throw ParseError("dataset has no user with >= 3 interactions");
    }
    return ds;
}

int parse_int_field(const std::string& line, std::size_t begin, std::size_t end, int line_no) {
    int value = 0;
    auto res = std::from_chars(line.data() + begin, line.data() + end, value);
    if (res.ec != std::errc() || res.ptr != line.data() + end) {
        throw ParseError("malformed field at line " + std::to_string(line_no) + ": " + line);
    }
    return value;
}

}  // namespace

InteractionDataset load_ml1m(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open file: " + path);
    }

    struct Row {
        int user, item;
        long long ts;
        long long order;  // file position, tie-break for equal timestamps
    };
    std::vector<Row> rows;
    std::unordered_map<int, int> user_index, item_index;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();

        // UserID::MovieID::Rating::Timestamp
        std::size_t p1 = line.find("::");
        std::size_t p2 = (p1 == std::string::npos) ? std::string::npos : line.find("::", p1 + 2);
        std::size_t p3 = (p2 == std::string::npos) ? std::string::npos : line.find("::", p2 + 2);
        if (p3 == std::string::npos) {
            throw ParseError("malformed line " + std::to_string(line_no) + ": " + line);
        }
        int raw_user = parse_int_field(line, 0, p1, line_no);
        int raw_item = parse_int_field(line, p1 + 2, p2, line_no);
        parse_int_field(line, p2 + 2, p3, line_no);  // rating, implicit positive
        long long ts = 0;
        {
            auto res = std::from_chars(line.data() + p3 + 2, line.data() + line.size(), ts);
            if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
                throw ParseError("malformed timestamp at line " + std::to_string(line_no));
            }
        }

        int user = static_cast<int>(user_index.try_emplace(raw_user, user_index.size()).first->second);
        int item = static_cast<int>(item_index.try_emplace(raw_item, item_index.size()).first->second);
        rows.push_back({user, item, ts, line_no});
    }

    std::vector<std::vector<Row>> per_user_rows(user_index.size());
    for (const auto& r : rows) per_user_rows[r.user].push_back(r);

    std::vector<std::vector<int>> per_user(user_index.size());
    for (std::size_t u = 0; u < per_user_rows.size(); ++u) {
        auto& urows = per_user_rows[u];
        std::stable_sort(urows.begin(), urows.end(), [](const Row& a, const Row& b) {
            return a.ts < b.ts;  // stable keeps file order on ties
        });
        per_user[u].reserve(urows.size());
        for (const auto& r : urows) per_user[u].push_back(r.item);
    }
    return build_split(std::move(per_user), static_cast<int>(item_index.size()));
}

InteractionDataset generate_synthetic(const SyntheticParams& p) {
    if (p.num_users <= 0 || p.num_items <= 0 || p.num_latent_groups <= 0 ||
        p.interactions_per_user < 3) {
        throw ConfigError("synthetic dataset: all counts must be positive and interactions_per_user >= 3");
    }
    if (p.num_items < p.num_latent_groups) {
        throw ConfigError("synthetic dataset: num_items < num_latent_groups");
    }

    Rng rng = make_stream(p.seed, 0x53594e54ULL);

    std::vector<int> user_group(p.num_users), item_group(p.num_items);
    for (int u = 0; u < p.num_users; ++u) user_group[u] = u % p.num_latent_groups;
    for (int i = 0; i < p.num_items; ++i) item_group[i] = i % p.num_latent_groups;

    std::vector<std::vector<int>> items_of_group(p.num_latent_groups);
    for (int i = 0; i < p.num_items; ++i) items_of_group[item_group[i]].push_back(i);

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> any_item(0, p.num_items - 1);

    std::vector<std::vector<int>> per_user(p.num_users);
    for (int u = 0; u < p.num_users; ++u) {
        const auto& own = items_of_group[user_group[u]];
        std::uniform_int_distribution<int> own_item(0, static_cast<int>(own.size()) - 1);
        per_user[u].reserve(p.interactions_per_user);
        for (int t = 0; t < p.interactions_per_user; ++t) {
            int item = (coin(rng) < 0.9) ? own[own_item(rng)] : any_item(rng);
            per_user[u].push_back(item);
        }
    }
    // Sequential timestamps == list order, so build_split consumes directly.
    return build_split(std::move(per_user), p.num_items);
}

std::vector<TrainingExample> sample_batch(const InteractionDataset& dataset, int user_id,
                                          int num_negatives, Rng& rng) {
    const auto& train = dataset.train.at(user_id);
    if (train.empty()) {
        throw ConfigError("sample_batch: user has empty train list");
    }
    if (static_cast<int>(dataset.history[user_id].size()) >= dataset.num_items && num_negatives > 0) {
        throw ConfigError("sample_batch: user interacted with every item, cannot sample negatives");
    }
    std::vector<TrainingExample> batch;
    batch.reserve(train.size());
    std::uniform_int_distribution<int> pick(0, dataset.num_items - 1);
    for (int pos : train) {
        TrainingExample ex;
        ex.user_id = user_id;
        ex.positive = pos;
        ex.negatives.reserve(num_negatives);
        for (int j = 0; j < num_negatives; ++j) {
            int cand = pick(rng);
            while (dataset.interacted(user_id, cand)) cand = pick(rng);
            ex.negatives.push_back(cand);
        }
        batch.push_back(std::move(ex));
    }
    return batch;
}

}  // namespace fedsim
