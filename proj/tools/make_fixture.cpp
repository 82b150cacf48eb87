// Regenerates the offline fixture: a 25-product catalog, scripted backend
// answers recorded as replay transcripts, the run config, and golden outputs.
//
//   make_fixture [out_dir]      (default: data/fixture)
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecomedit/backends.hpp"
#include "ecomedit/benchmark.hpp"
#include "ecomedit/catalog.hpp"
#include "ecomedit/pipeline.hpp"
#include "ecomedit/text.hpp"

namespace {

using namespace ecomedit;
namespace fs = std::filesystem;

struct Scripted {
    std::string id;
    Category category;
    std::string title;
    std::string description;
    std::map<std::string, std::string> details;
    std::optional<std::string> image;
    std::string neighbor_attr, neighbor_value;
    std::string replacement;
    std::vector<std::string> concepts;
    std::vector<std::string> features;  // three correct ones
    std::string wrong_feature, feature_fix;
    std::string intention;
    std::string wrong_intention, intention_fix;
};

const std::string kLead = "The intention of buying this is to ";

std::vector<Scripted> products() {
    using C = Category;
    return {
        {"E01", C::Electronics,
         "2020 Lenovo V330 15.6\" FHD Business Laptop Computer, 8th Gen Intel Quad-Core i7-8550U Up to 4.0GHz, 12GB "
         "RAM, 512GB PCIE SSD + 1TB HDD, Windows 10 Professional + EST 500GB External Hard Drive",
         "15.6 inch FHD business laptop with an Intel i7-8550U, 12GB RAM, 512GB PCIe SSD and 1TB HDD.",
         {{"brand", "Lenovo"}, {"ram", "12GB"}}, "images/E01.jpg", "memory", "12GB RAM",
         "the Lenovo V330 business laptop", {"Business Laptop Computer", "Lenovo 15.6 inch Laptop", "Windows 10 Laptop"},
         {"Intel Quad-Core i7-8550U processor", "15.6 inch FHD display", "512GB PCIe SSD plus 1TB HDD"},
         "Up to 4GB RAM", "Up to 12GB RAM",
         kLead + "get a capable laptop for office work.", kLead + "play the newest console games.",
         "To run business software on a portable computer"},
        {"E02", C::Electronics, "JBL Reference 410 Headphone -Black", "", {{"brand", "JBL"}, {"color", "Black"}},
         std::nullopt, "color", "Black", "the JBL wired headphones", {"JBL Headphones", "Black Over-Ear Headphones"},
         {"Over-ear closed-back design", "Detachable cable with in-line remote", "Lightweight aluminum construction"},
         "Active noise cancellation", "Passive noise isolation from closed-back ear cups",
         kLead + "enjoy music with a comfortable headset.", kLead + "listen to music and take calls.",
         "To enjoy high-quality audio for immersive listening experiences"},
        {"E03", C::Electronics, "Anker PowerCore 10000 Portable Charger",
         "Compact 10000mAh power bank with PowerIQ fast charging.", {{"brand", "Anker"}, {"capacity", "10000mAh"}},
         std::nullopt, "capacity", "10000mAh", "the Anker power bank", {"Portable Power Bank", "USB Battery Pack"},
         {"10000mAh capacity", "PowerIQ fast charging", "Compact and lightweight body"},
         "Built-in solar charging panel", "Recharges through a micro USB input",
         kLead + "charge a phone while traveling.", kLead + "power a desktop computer during outages.",
         "To recharge phones and small devices away from an outlet"},
        {"E04", C::Electronics, "Logitech M185 Wireless Mouse, Gray", "", {}, std::nullopt, "", "",
         "the Logitech cordless mouse", {"Wireless Computer Mouse", "Gray Optical Mouse"},
         {"Plug-and-play USB nano receiver", "Up to one year of battery life", "Compact ambidextrous shape"},
         "Bluetooth connection", "Connects through a USB nano receiver",
         kLead + "control a laptop without a cable.", kLead + "play competitive esports games.",
         "To navigate a computer with a simple cordless mouse"},
        {"E05", C::Electronics, "Kindle Paperwhite E-reader 6 inch Waterproof",
         "Glare-free 300 ppi display, waterproof design and weeks of battery life.", {{"brand", "Amazon"}},
         std::nullopt, "display", "a glare-free 300 ppi screen",
         "Kindle Paperwhite E-reader 6 inch Waterproof", {"Waterproof E-reader", "Kindle E-book Reader"},
         {"Glare-free 300 ppi display", "Waterproof design", "Weeks of battery life"},
         "Full color LCD screen", "Glare-free black and white E Ink display",
         kLead + "read e-books comfortably anywhere.", kLead + "stream movies in high definition.",
         "To read books on a glare-free waterproof screen"},

        {"H01", C::HomeKitchen, "Vev Vigano Eco Ceramic Nonstick Frying Pan",
         "Eco ceramic nonstick frying pan made in Italy.", {{"material", "Ceramic coated aluminum"}},
         "images/H01.jpg", "coating", "eco ceramic nonstick", "the Vev Vigano ceramic skillet",
         {"Ceramic Frying Pan", "Nonstick Skillet", "Eco Cookware"},
         {"Eco ceramic nonstick coating", "Even heat distribution", "Comfortable stay-cool handle"},
         "Durable Construction: The pan is made from high-quality stainless steel.",
         "Durable Eco-Friendly Ceramic Coating: The pan features a high-quality eco-friendly ceramic nonstick surface.",
         kLead + "cook with less oil on a nonstick surface.", kLead + "bake bread in a hot oven.",
         "To fry food on a healthy nonstick ceramic surface"},
        {"H02", C::HomeKitchen, "Winsome Wood Assembled Set of 2 Kids Chairs, White",
         "Set of two assembled wooden chairs for children.", {{"color", "White"}, {"material", "Solid wood"}},
         std::nullopt, "color", "white", "the Winsome kids chair set",
         {"White Wood Chairs", "Kids Wood Assembled Set of 2 Chairs"},
         {"Solid wood construction", "Arrives fully assembled", "Set of two chairs"},
         "Adjustable Height", "Fixed seat height sized for children",
         kLead + "give children a sturdy place to sit.", kLead + "furnish an office conference room.",
         "To seat young children at a play table"},
        {"H03", C::HomeKitchen, "RED or BLUE or GREEN Silicone Microwave Popcorn Popper Popcorn Maker CUCINA LAURA",
         "Collapsible silicone popcorn popper for the microwave.", {}, std::nullopt, "material", "silicone",
         "the CUCINA LAURA popcorn bowl", {"Silicone Popcorn Popper", "Microwave Popcorn Bowl"},
         {"Collapsible silicone bowl", "Microwave safe", "Dishwasher safe"},
         "Dishwasher-unsafe plastic bowl", "Collapsible Silicone Design for Easy Storage and Microwave Use",
         kLead + "pop popcorn in the microwave without bags.", kLead + "cook rice for a large family.",
         "To make popcorn in the microwave without oil"},
        {"H04", C::HomeKitchen, "Hamilton Beach 2-Way Brewer Coffee Maker",
         "Brews a full 12-cup pot or a single cup.", {{"brand", "Hamilton Beach"}, {"capacity", "12 cups"}},
         std::nullopt, "capacity", "12 cups", "the Hamilton Beach dual coffee brewer",
         {"Dual Coffee Maker", "Drip Coffee Machine", "Single Serve Brewer"},
         {"Brews a 12-cup carafe", "Single-serve side", "Programmable clock"},
         "Built-in bean grinder", "Single-serve side with a 12-cup carafe side",
         kLead + "brew coffee for one or for a crowd.", kLead + "make espresso shots with milk foam.",
         "To brew either a single cup or a full pot of coffee"},
        {"H05", C::HomeKitchen, "Utopia Bedding Queen Pillows, Set of 2", "",
         {{"fill", "Polyester fiber"}, {"size", "Queen"}}, std::nullopt, "size", "queen",
         "the Utopia queen bed pillows", {"Queen Bed Pillows", "Polyester Pillow Set"},
         {"Soft polyester fiber fill", "Set of two pillows", "Queen size"},
         "Memory foam core", "Soft polyester fiber fill",
         kLead + "sleep comfortably on soft pillows.", kLead + "support the lower back while driving.",
         "To replace old bed pillows with soft fiber pillows"},

        {"C01", C::ClothingShoesJewelry, "Levi's Men's 505 Regular Fit Jeans",
         "Regular fit jeans with a straight leg and zip fly.", {{"brand", "Levi's"}, {"fit", "Regular"}},
         std::nullopt, "fit", "regular", "the Levi's 505 denim pants", {"Men's Regular Fit Jeans", "Straight Leg Denim"},
         {"Regular fit through the seat and thigh", "Straight leg", "Zip fly"},
         "Stretch skinny fit", "Regular fit with a straight leg",
         kLead + "wear classic everyday jeans.", kLead + "wear formal attire at a wedding.",
         "To wear comfortable straight leg jeans every day"},
        {"C02", C::ClothingShoesJewelry, "Crocs Unisex Classic Clog",
         "Lightweight Croslite foam clog with ventilation ports.", {{"brand", "Crocs"}}, std::nullopt, "material",
         "Croslite foam", "the Crocs foam clog", {"Foam Clogs", "Unisex Casual Shoes"},
         {"Lightweight Croslite foam", "Ventilation ports", "Pivoting heel strap"},
         "Genuine leather upper", "Lightweight Croslite foam construction",
         kLead + "wear light and comfortable shoes around the house.", kLead + "go hiking on rocky mountain trails.",
         "To wear easy slip-on shoes for casual comfort"},
        {"C03", C::ClothingShoesJewelry, "Hanes Men's ComfortSoft Cotton T-Shirt, 6-Pack", "",
         {{"material", "100% cotton"}, {"pack", "6"}}, std::nullopt, "material", "100% cotton",
         "the Hanes cotton tee pack", {"Men's Cotton T-Shirts", "Crew Neck Tee Pack"},
         {"Soft 100% cotton fabric", "Tag-free collar", "Pack of six shirts"},
         "Moisture-wicking polyester fabric", "Soft 100% cotton fabric",
         kLead + "stock up on basic everyday shirts.", kLead + "wear a rain jacket in a storm.",
         "To have soft cotton shirts for daily wear"},
        {"C04", C::ClothingShoesJewelry, "Pandora Moments Snake Chain Bracelet, Sterling Silver",
         "Sterling silver snake chain charm bracelet with barrel clasp.", {{"metal", "Sterling silver"}},
         std::nullopt, "metal", "sterling silver", "the Pandora silver charm bracelet",
         {"Sterling Silver Bracelet", "Charm Bracelet"},
         {"Sterling silver snake chain", "Barrel clasp", "Holds Pandora charms"},
         "Gold-plated brass chain", "Sterling silver snake chain",
         kLead + "collect charms on a silver bracelet.", kLead + "track fitness activity during the day.",
         "To give a silver charm bracelet as a gift"},
        {"C05", C::ClothingShoesJewelry, "Columbia Women's Benton Springs Fleece Jacket", "", {}, std::nullopt, "",
         "", "the Columbia women's fleece", {"Women's Fleece Jacket", "Full Zip Fleece"},
         {"Soft MTR filament fleece", "Full zip front", "Zippered side pockets"},
         "Waterproof Gore-Tex shell", "Soft MTR filament fleece",
         kLead + "stay warm on cool days.", kLead + "stay dry during heavy rain.",
         "To add a warm fleece layer in cool weather"},

        {"I01", C::IndustrialScientific, "3M 6200 Half Facepiece Reusable Respirator, Medium",
         "Reusable half mask respirator compatible with 3M filters.", {{"brand", "3M"}, {"size", "Medium"}},
         std::nullopt, "size", "medium", "the 3M half mask respirator",
         {"Half Face Respirator", "Reusable Respirator Mask"},
         {"Reusable half facepiece", "Compatible with 3M filters", "Lightweight elastomer body"},
         "Full face shield included", "Half facepiece covering nose and mouth",
         kLead + "protect the lungs from dust and fumes.", kLead + "breathe underwater while diving.",
         "To filter dust and vapors at a job site"},
        {"I02", C::IndustrialScientific, "AmScope 40X-2000X LED Student Compound Microscope",
         "Compound microscope with LED illumination and magnification from 40X to 2000X.", {{"brand", "AmScope"}},
         std::nullopt, "magnification", "40X to 2000X", "the AmScope student microscope",
         {"Student Compound Microscope", "LED Lab Microscope"},
         {"LED illumination", "Magnification from 40X to 2000X", "Metal frame"},
         "Magnification up to 500X", "Magnification from 40X to 2000X",
         kLead + "examine slides for biology class.", kLead + "watch stars and planets at night.",
         "To study specimens in a school laboratory"},
        {"I03", C::IndustrialScientific, "Fluke 101 Basic Digital Multimeter", "",
         {{"brand", "Fluke"}, {"safety rating", "CAT III 600V"}}, std::nullopt, "safety rating", "CAT III 600V",
         "the Fluke pocket multimeter", {"Digital Multimeter", "Pocket Electrical Tester"},
         {"Measures voltage and resistance", "CAT III 600V safety rating", "Compact pocket size"},
         "Built-in thermal camera", "Measures voltage, resistance and continuity",
         kLead + "test household electrical circuits.", kLead + "measure body temperature.",
         "To check voltage and continuity in electrical work"},
        {"I04", C::IndustrialScientific, "Nitrile Disposable Gloves, Powder-Free, Box of 100",
         "Powder-free nitrile exam gloves, latex free.", {{"count", "100"}}, std::nullopt, "material", "nitrile",
         "the nitrile exam gloves", {"Disposable Exam Gloves", "Powder-Free Gloves"},
         {"Latex-free nitrile material", "Powder-free", "Box of 100 gloves"},
         "Made from natural latex", "Latex-free nitrile material",
         kLead + "keep hands clean while working.", kLead + "keep hands warm in the snow.",
         "To protect hands during cleaning or medical tasks"},
        {"I05", C::IndustrialScientific, "Gorilla Heavy Duty Mounting Tape, 1 inch x 60 inch",
         "Double-sided mounting tape that holds up to 15 lbs.", {{"brand", "Gorilla"}}, std::nullopt,
         "holding strength", "15 lbs", "the Gorilla double-sided tape", {"Double-Sided Mounting Tape", "Heavy Duty Tape"},
         {"Double-sided adhesive", "Holds up to 15 lbs", "Works indoors and outdoors"},
         "Holds up to 100 lbs", "Holds up to 15 lbs",
         kLead + "hang light items without nails.", kLead + "seal leaking water pipes.",
         "To mount light objects on walls without drilling"},

        {"S01", C::SportsOutdoors, "Coleman Sundome 4-Person Dome Tent",
         "4-person dome tent with WeatherTec system and easy setup.", {{"brand", "Coleman"}}, std::nullopt,
         "capacity", "4 people", "the Coleman dome camping tent", {"Dome Camping Tent", "4-Person Tent"},
         {"Sleeps up to 4 people", "WeatherTec system", "Sets up in about 10 minutes"},
         "Sleeps 8 people", "Sleeps up to 4 people",
         kLead + "camp outdoors with a small family.", kLead + "live in it through the winter.",
         "To shelter a small group on a camping trip"},
        {"S02", C::SportsOutdoors, "Hydro Flask 32 oz Wide Mouth Water Bottle",
         "Double-wall vacuum insulated stainless steel bottle.", {{"capacity", "32 oz"}}, std::nullopt, "capacity",
         "32 oz", "the Hydro Flask insulated bottle", {"Insulated Water Bottle", "Stainless Steel Bottle"},
         {"Double-wall vacuum insulation", "Wide mouth opening", "Stainless steel body"},
         "Keeps drinks cold for 2 hours", "Keeps drinks cold for up to 24 hours",
         kLead + "keep water cold during workouts.", kLead + "brew tea on a camping stove.",
         "To carry cold water all day"},
        {"S03", C::SportsOutdoors, "Spalding NBA Street Outdoor Basketball", "",
         {{"size", "7"}, {"surface", "Outdoor rubber"}}, std::nullopt, "size", "7", "the Spalding street ball",
         {"Outdoor Basketball", "Rubber Basketball"},
         {"Durable rubber cover", "Official size 7", "Deep channel design"},
         "Indoor-only leather cover", "Durable rubber cover for outdoor courts",
         kLead + "play basketball on outdoor courts.", kLead + "play volleyball on the beach.",
         "To shoot hoops on asphalt courts"},
        {"S04", C::SportsOutdoors, "BalanceFrom GoYoga All-Purpose Yoga Mat, 1/4 inch",
         "Extra thick yoga mat with moisture-resistant surface and carrying strap.", {{"thickness", "1/4 inch"}},
         std::nullopt, "thickness", "1/4 inch", "the BalanceFrom exercise mat", {"Yoga Mat", "Exercise Mat"},
         {"Extra thick padding", "Moisture-resistant surface", "Carrying strap"},
         "Made of natural cork", "Moisture-resistant foam with a carrying strap",
         kLead + "practice yoga on a cushioned surface.", kLead + "sleep on it while camping.",
         "To cushion the floor during yoga practice"},
        {"S05", C::SportsOutdoors, "Garmin Forerunner 55 GPS Running Watch",
         "GPS running smartwatch with daily suggested workouts.", {{"brand", "Garmin"}}, std::nullopt,
         "positioning", "built-in GPS", "the Garmin running smartwatch", {"GPS Running Watch", "Fitness Smartwatch"},
         {"Built-in GPS", "Daily suggested workouts", "Up to two weeks of battery life"},
         "Built-in LTE cellular calling", "Built-in GPS with suggested workouts",
         kLead + "track pace and distance while running.", kLead + "make phone calls without a phone.",
         "To follow running progress with GPS tracking"},
    };
}

const std::string kNoise = "[ 1 ]  [ 3 ]  [ 5 ]  [ 7 ]  [ 9 ]  [ 11 ]  [ 13 ]  [ 15 ]  [ 17 ]  [ 19 ]  [ 21 ]  [ 23 ]  "
                           "[ 25 ]  [ 27 ]";

// Text between `open` and the first later `close`, or empty.
std::string between(const std::string& s, std::string_view open, std::string_view close) {
    auto a = s.find(open);
    if (a == std::string::npos) return {};
    a += open.size();
    auto b = s.find(close, a);
    return b == std::string::npos ? std::string() : s.substr(a, b - a);
}

class Script {
public:
    explicit Script(std::vector<Scripted> items) : items_(std::move(items)) {
        for (std::size_t i = 0; i < items_.size(); ++i) {
            by_title_[items_[i].title] = i;
            fixes_[items_[i].wrong_feature] = items_[i].feature_fix;
            fixes_[items_[i].wrong_intention] = items_[i].intention_fix;
        }
    }

    std::string student(const GenRequest& req, bool second) const {
        const bool intention = req.prompt.rfind("A customer buys a product: ", 0) == 0;
        const std::string title = intention ? between(req.prompt, "A customer buys a product: ", ". What is")
                                            : between(req.prompt, "Consider this product: ", ".\nWhat are");
        const std::size_t i = by_title_.at(title);
        const Scripted& p = items_[i];
        if (intention) {
            if (second && p.id == "C02") return "Crocs are bought for easy slip-on comfort.";
            const bool wrong = second ? i % 3 == 1 : i % 3 == 0;
            return (wrong ? p.wrong_intention : p.intention) + "\n";
        }
        if (!second) {
            std::string out = "- " + p.features[0] + "\n- " + (i % 2 == 0 ? p.wrong_feature : p.features[1]) +
                              "\n- " + p.features[2] + "\n";
            if (p.id == "S01") out += "- Includes a rain fly\n- Mesh storage pockets\n";
            return out;
        }
        if (p.id == "H03") return kNoise;
        return "1. " + p.features[1] + "\n2. " + (i % 2 == 1 ? p.wrong_feature : p.features[2]) + "\n3. " +
               p.features[0];
    }

    std::string judge(const GenRequest& req) const {
        const std::string& q = req.prompt;
        const bool retry = q.find("\nPlease start your answer with yes or no.") != std::string::npos;
        if (q.find("Do you think it has this feature: ") != std::string::npos) {
            const std::string claim = between(q, "this feature: ", "?\nPlease first answer");
            if (claim == "Magnification up to 500X" && !retry) return "The listed range looks too low to me.";
            auto it = fixes_.find(claim);
            if (it == fixes_.end()) return "Yes";
            return "No. The product listing does not support this feature. Corrected feature: " + it->second;
        }
        if (q.find("Do you think the product's ") != std::string::npos) {
            const std::string claim = between(q, "intention of buying is ", "?\nPlease first answer");
            if (claim == items_[by_title_.at("Hamilton Beach 2-Way Brewer Coffee Maker")].intention)
                return "It depends on the household.";
            auto it = fixes_.find(claim);
            if (it == fixes_.end()) return "yes";
            return "No, this is not why customers usually buy it. Corrected product detail: " + it->second;
        }
        if (q.rfind("Please replace this product with another term: ", 0) == 0) {
            const Scripted& p = items_[by_title_.at(between(q, "another term: ", ".\nYou should"))];
            std::string out;
            for (std::size_t k = 0; k < p.concepts.size(); ++k) out += std::to_string(k + 1) + ". " + p.concepts[k] + "\n";
            return out;
        }
        if (q.rfind("Please replace this subject with another term: ", 0) == 0) {
            const std::string subject = between(q, "another term: ", ".\nYou should");
            if (auto it = by_title_.find(subject); it != by_title_.end()) return items_[it->second].replacement;
            return "this " + text::to_lower(subject);
        }
        if (q.find("\nHere is a description of the product: ") != std::string::npos) {
            const Scripted& p = items_[by_title_.at(between(q, "Consider this product: ", ".\nHere is"))];
            if (p.id == "H03") return "Popcorn is a tasty snack for movie nights.";
            return "The " + p.neighbor_attr + " of " + p.title + " is " + p.neighbor_value + ".";
        }
        throw std::runtime_error("judge script has no answer for: " + q.substr(0, 80));
    }

    std::string corrector(const GenRequest& req) const {
        const std::string claim = between(req.prompt, "identified a wrong feature: ", "\nPlease suggest");
        const std::string key =
            claim.empty() ? between(req.prompt, "wrong intention for buying this item: ", "\nPlease suggest") : claim;
        return fixes_.at(key);
    }

    static std::string scorer(const GenRequest& req) {
        const auto h = text::fnv1a64(req.prompt);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", static_cast<double>(h % 100) / 100.0);
        return buf;
    }

private:
    std::vector<Scripted> items_;
    std::map<std::string, std::size_t> by_title_;
    std::map<std::string, std::string> fixes_;
};

BackendConfig role(const std::string& model_id, bool image = false) {
    BackendConfig c;
    c.kind = BackendKind::replay;
    c.model_id = model_id;
    c.transcript = fs::path("transcripts") / (model_id + ".jsonl");
    c.supports_image = image;
    return c;
}

nlohmann::ordered_json role_json(const BackendConfig& c) {
    nlohmann::ordered_json j{{"kind", "replay"}, {"model_id", c.model_id}, {"transcript", c.transcript->string()}};
    if (c.supports_image) j["supports_image"] = true;
    return j;
}

void write_file(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary | std::ios::trunc) << contents;
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixture");
    const Script script(products());

    std::vector<ProductRecord> catalog;
    for (const auto& p : products())
        catalog.push_back({p.id, p.title, p.category, p.description, p.details, p.image});
    fs::create_directories(out);
    write_catalog(catalog, out / "catalog.jsonl");

    const BackendConfig sa = role("student-a"), sb = role("student-b"), judge_cfg = role("judge"),
                        scorer_cfg = role("scorer"), corrector_cfg = role("corrector", true);

    nlohmann::ordered_json config{
        {"paths",
         {{"catalog", "catalog.jsonl"},
          {"benchmark", "out/benchmark.jsonl"},
          {"stats", "out/stats.txt"},
          {"manifest", "out/manifest.jsonl"},
          {"checkpoints", "out/checkpoints"},
          {"outcomes", "out/outcomes"},
          {"model", "out/toy_model.bin"},
          {"report", "out/report.txt"}}},
        {"backends",
         {{"students", {role_json(sa), role_json(sb)}},
          {"judge", role_json(judge_cfg)},
          {"scorer", role_json(scorer_cfg)},
          {"corrector", role_json(corrector_cfg)}}},
        {"pipeline", {{"plausibility_threshold", 0.5}, {"seed", 7}, {"concurrency", 1}, {"max_rejudge", 1}}},
        {"edit", {{"default", {{"n_prefixes", 0}, {"optimizer", {{"steps", 100}}}}}}},
        {"metrics", {{"locality_horizon", 20}}},
        {"model", {{"id", "toy"}, {"vocab_words", 512}, {"seed", 1234}}},
        {"covariance", {{"samples", 2000}, {"damping_scale", 0.01}, {"synthetic_sentences", 200}, {"seed", 11}}},
    };
    write_file(out / "ecomedit.json", config.dump(2) + "\n");

    // Record every scripted answer through the real pipeline.
    fs::remove_all(out / "transcripts");
    fs::create_directories(out / "transcripts");
    auto recorded = [&](const BackendConfig& cfg, FunctionBackend::Fn fn) {
        return std::make_unique<RecordingBackend>(std::make_unique<FunctionBackend>(cfg, std::move(fn)),
                                                  out / *cfg.transcript);
    };
    auto student_a = recorded(sa, [&](const GenRequest& r) { return script.student(r, false); });
    auto student_b = recorded(sb, [&](const GenRequest& r) { return script.student(r, true); });
    auto judge = recorded(judge_cfg, [&](const GenRequest& r) { return script.judge(r); });
    auto scorer = recorded(scorer_cfg, &Script::scorer);
    auto corrector = recorded(corrector_cfg, [&](const GenRequest& r) { return script.corrector(r); });

    PipelineConfig pc;
    pc.plausibility_threshold = 0.5;
    pc.seed = 7;
    const auto sampled = sample_products(catalog, catalog.size(), pc.seed);
    auto run = run_stage_pipeline(sampled, {{student_a.get(), student_b.get()}, judge.get(), scorer.get(), corrector.get()}, pc);
    auto assembled = assemble_samples(run.candidates, *judge, 1);
    for (const auto& m : run.manifest)
        if (m.fatal) {
            std::cerr << "fatal: " << m.item << " " << m.stage << ": " << m.message << "\n";
            return 1;
        }

    write_benchmark(assembled.samples, out / "golden" / "benchmark.jsonl");
    write_file(out / "golden" / "stats.txt", render_stats(compute_stats(assembled.samples)));
    std::cout << "claims " << run.claims.size() << ", candidates " << run.candidates.size() << ", samples "
              << assembled.samples.size() << "\n";
    return 0;
}
