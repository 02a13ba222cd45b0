#include <unordered_map>

#include "mbtsad/augment.hpp"

namespace mbtsad {

// Small bundled synonym table; groups are interchangeable words. Kept to
// everyday review vocabulary so synonym replacement stays label-preserving
// on sentiment data.
const std::vector<std::vector<std::string>>& synonym_groups() {
    static const std::vector<std::vector<std::string>> groups = {
        {"great", "wonderful", "terrific", "fantastic", "superb"},
        {"excellent", "outstanding", "exceptional", "first-rate"},
        {"good", "fine", "solid", "decent"},
        {"beautiful", "lovely", "gorgeous", "stunning"},
        {"charming", "delightful", "endearing", "winning"},
        {"funny", "hilarious", "comic", "amusing", "witty"},
        {"moving", "touching", "affecting", "poignant"},
        {"thrilling", "exciting", "gripping", "electrifying"},
        {"clever", "smart", "sharp", "ingenious"},
        {"brilliant", "masterful", "dazzling", "inspired"},
        {"heartfelt", "sincere", "earnest", "genuine"},
        {"refreshing", "inventive", "original", "imaginative"},
        {"engaging", "absorbing", "entertaining", "enjoyable"},
        {"joyous", "cheerful", "uplifting", "buoyant"},
        {"vivid", "colorful", "vibrant", "lively"},
        {"sublime", "magnificent", "glorious", "majestic"},
        {"tender", "gentle", "warm", "affectionate"},
        {"elegant", "graceful", "polished", "refined"},
        {"powerful", "potent", "forceful", "strong"},
        {"memorable", "unforgettable", "indelible"},
        {"awful", "terrible", "horrible", "dreadful", "atrocious"},
        {"bad", "poor", "weak", "lousy"},
        {"boring", "dull", "tedious", "monotonous", "tiresome"},
        {"bland", "flavorless", "insipid", "flat"},
        {"clumsy", "awkward", "ungainly", "sloppy"},
        {"messy", "chaotic", "disorganized", "muddled"},
        {"lifeless", "listless", "inert", "stagnant"},
        {"grating", "irritating", "annoying", "aggravating"},
        {"hollow", "empty", "vacuous", "shallow"},
        {"stale", "tired", "hackneyed", "trite"},
        {"painful", "excruciating", "agonizing", "unbearable"},
        {"murky", "muddy", "unclear", "opaque"},
        {"pointless", "aimless", "meaningless", "futile"},
        {"lame", "feeble", "limp", "anemic"},
        {"forgettable", "unremarkable", "disposable", "negligible"},
        {"uneven", "inconsistent", "erratic", "patchy"},
        {"dismal", "bleak", "gloomy", "dreary"},
        {"dumb", "silly", "foolish", "mindless"},
        {"slow", "sluggish", "plodding", "leaden"},
        {"cheap", "shoddy", "tacky", "chintzy"},
        {"film", "movie", "picture", "feature"},
        {"story", "tale", "narrative", "yarn"},
        {"plot", "storyline", "premise"},
        {"script", "screenplay", "writing"},
        {"acting", "performances", "portrayals"},
        {"cast", "ensemble", "players"},
        {"direction", "directing", "helming"},
        {"pacing", "tempo", "rhythm"},
        {"dialogue", "lines", "banter"},
        {"ending", "finale", "conclusion", "climax"},
        {"scene", "sequence", "moment"},
        {"soundtrack", "score", "music"},
        {"visuals", "imagery", "cinematography"},
        {"character", "role", "figure"},
        {"director", "filmmaker", "auteur"},
        {"actor", "performer", "player"},
        {"audience", "viewers", "crowd"},
        {"comedy", "farce", "satire"},
        {"drama", "melodrama"},
        {"begin", "start", "commence", "open"},
        {"end", "finish", "conclude", "close"},
        {"show", "display", "exhibit", "present"},
        {"make", "create", "produce", "craft"},
        {"watch", "see", "view", "observe"},
        {"like", "enjoy", "appreciate", "relish"},
        {"hate", "despise", "loathe", "detest"},
        {"feel", "sense", "experience"},
        {"think", "believe", "reckon", "suppose"},
        {"keep", "hold", "retain", "maintain"},
        {"leave", "depart", "exit"},
        {"give", "offer", "provide", "deliver"},
        {"find", "discover", "uncover", "locate"},
        {"tell", "narrate", "recount", "relate"},
        {"seem", "appear", "look"},
        {"become", "turn", "grow"},
        {"happen", "occur", "unfold"},
        {"try", "attempt", "endeavor"},
        {"fail", "flop", "falter", "collapse"},
        {"succeed", "triumph", "prevail", "flourish"},
        {"move", "shift", "travel"},
        {"build", "construct", "assemble"},
        {"break", "shatter", "fracture"},
        {"capture", "seize", "grab"},
        {"reveal", "expose", "unveil", "disclose"},
        {"big", "large", "huge", "enormous", "vast"},
        {"small", "little", "tiny", "minute"},
        {"fast", "quick", "rapid", "swift", "speedy"},
        {"new", "fresh", "novel", "recent"},
        {"old", "aged", "ancient", "vintage"},
        {"hard", "difficult", "tough", "demanding"},
        {"easy", "simple", "effortless", "straightforward"},
        {"happy", "glad", "pleased", "content"},
        {"sad", "unhappy", "sorrowful", "mournful"},
        {"angry", "furious", "irate", "enraged"},
        {"calm", "serene", "tranquil", "placid"},
        {"strange", "odd", "weird", "peculiar", "bizarre"},
        {"common", "ordinary", "usual", "typical"},
        {"rare", "scarce", "uncommon", "infrequent"},
        {"bright", "radiant", "luminous", "brilliant"},
        {"dark", "dim", "shadowy", "murky"},
        {"loud", "noisy", "deafening", "thunderous"},
        {"quiet", "silent", "hushed", "muted"},
        {"rich", "wealthy", "affluent", "opulent"},
        {"deep", "profound", "bottomless"},
        {"wide", "broad", "expansive", "sweeping"},
        {"whole", "entire", "complete", "full"},
        {"real", "genuine", "authentic", "true"},
        {"false", "fake", "phony", "bogus"},
        {"important", "significant", "crucial", "vital"},
        {"trivial", "minor", "petty", "negligible"},
        {"smart", "intelligent", "bright", "brainy"},
        {"brave", "courageous", "fearless", "valiant"},
        {"scared", "afraid", "frightened", "terrified"},
        {"tired", "weary", "exhausted", "fatigued"},
        {"clean", "spotless", "immaculate", "pristine"},
        {"dirty", "filthy", "grimy", "soiled"},
        {"cold", "chilly", "frigid", "icy"},
        {"hot", "scorching", "sweltering", "blazing"},
        {"wet", "damp", "soggy", "moist"},
        {"dry", "arid", "parched"},
        {"very", "quite", "truly", "really", "extremely"},
        {"rather", "somewhat", "fairly", "moderately"},
        {"almost", "nearly", "practically", "virtually"},
        {"often", "frequently", "regularly", "repeatedly"},
        {"always", "constantly", "perpetually", "invariably"},
        {"never", "nowise"},
        {"maybe", "perhaps", "possibly"},
        {"but", "yet", "however"},
        {"also", "too", "likewise"},
        {"finally", "eventually", "ultimately", "lastly"},
        {"mostly", "mainly", "chiefly", "largely"},
        {"surely", "certainly", "definitely", "undoubtedly"},
    };
    return groups;
}

std::vector<std::string> synonyms_of(const std::string& word) {
    static const std::unordered_map<std::string, const std::vector<std::string>*> index = [] {
        std::unordered_map<std::string, const std::vector<std::string>*> m;
        for (const auto& g : synonym_groups())
            for (const auto& w : g) m.emplace(w, &g);
        return m;
    }();
    auto it = index.find(word);
    if (it == index.end()) return {};
    std::vector<std::string> out;
    for (const auto& w : *it->second)
        if (w != word) out.push_back(w);
    return out;
}

}  // namespace mbtsad
