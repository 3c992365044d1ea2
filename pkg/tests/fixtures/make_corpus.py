"""One-shot generator for mini_corpus.jsonl; kept for provenance of the fixture."""
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# Odd ordinals are fabricated stories (label 1), even ordinals are genuine (label 0).
# Every content string ends with a "(ref <id>)" tag so scripted providers can key
# on the story without colliding with demonstration text in judge prompts.

HEALTH = [
    "A miracle vitamin blend sold through pop-up ads is said to cure every chronic illness in a week, and Metro Hospital staff are supposedly hiding the results. (ref h01)",
    "Metro Hospital published its quarterly review showing a modest decline in flu admissions following the winter vaccination drive. (ref h02)",
    "An anonymous post claims the city water supply was secretly dosed with a mood-altering compound during the night of the blackout. (ref h03)",
    "Regional clinics report that routine checkup bookings returned to their usual seasonal pattern after two unusual months. (ref h04)",
    "A viral thread insists that a common breakfast cereal rewires children's brains within days, citing a study nobody can locate. (ref h05)",
    "The health ministry released updated dietary guidance that slightly raises the recommended daily intake of vitamin D. (ref h06)",
    "Leaflets around the market square warn that this year's flu shot contains a tracking chip the size of a rice grain. (ref h07)",
    "A peer-reviewed trial found the new allergy tablet performs about as well as the older generation at half the dose. (ref h08)",
    "A celebrity nutritionist says drinking boiled cabbage water at midnight melts tumors, and clinics are allegedly furious. (ref h09)",
    "Metro Hospital opened a second dialysis wing, cutting average patient travel time across the district. (ref h10)",
]

SPORTS = [
    "A betting blog alleges the City Marathon winner rode a scooter through the tunnel section while marshals looked away. (ref s01)",
    "The City Marathon confirmed a record field of twelve thousand runners and no major incidents along the course. (ref s02)",
    "Fans are sharing a claim that the league final was scripted in advance, with the trophy engraved before kickoff. (ref s03)",
    "The second-division club announced a two-year sponsorship with a local brewery, extending a partnership that began in 2019. (ref s04)",
    "A fan page says the star striker has secretly retired and a body double has been playing the last three fixtures. (ref s05)",
    "Stadium authorities completed the planned resurfacing of the track ahead of the autumn meet. (ref s06)",
    "A post circulating in supporter groups claims referees wear earpieces controlled by the betting syndicates. (ref s07)",
    "The rowing federation published selection criteria for next season, unchanged except for an earlier trial date. (ref s08)",
    "An influencer insists the swimming time standards were quietly lowered overnight so a sponsor's athlete would qualify. (ref s09)",
    "Organizers of the City Marathon released the charity totals, up eight percent on last year's figure. (ref s10)",
]

TECH = [
    "A forum thread claims Quantum Labs shipped a phone update that listens for keywords and raises your insurance rates. (ref t01)",
    "Quantum Labs released a firmware patch fixing a battery drain bug reported by about two percent of users. (ref t02)",
    "A viral video says the new payment terminals beam card numbers to a foreign server every hour on the hour. (ref t03)",
    "The standards body ratified the revised charging connector specification after an eighteen-month comment period. (ref t04)",
    "Screenshots allege a social app's night mode secretly photographs users, which the poster calls an open secret. (ref t05)",
    "City hall finished migrating parking permits to the new portal; processing times fell from days to hours. (ref t06)",
    "A newsletter warns that smart thermostats sold last spring mine cryptocurrency whenever the house is empty. (ref t07)",
    "Quantum Labs published benchmark results for its midrange chip, showing gains in line with the vendor roadmap. (ref t08)",
    "A blog insists the weather satellites were switched off for a week and forecasts were generated by interns guessing. (ref t09)",
    "The open-source mapping project merged offline routing support after two years of incremental work. (ref t10)",
]

COMMENTED = {1, 3, 4, 6, 8, 9}

COMMENT_BANK = {
    "health": [
        "My cousin tried something like this and nothing happened.",
        "Source? The linked study goes to a dead page.",
        "The clinic near me confirmed this on their notice board.",
    ],
    "sports": [
        "I was at the event and saw nothing like this.",
        "The official site says something different.",
        "Half the replies are bots pushing the same link.",
    ],
    "tech": [
        "Changelog does not mention anything remotely close.",
        "I measured the traffic myself, nothing unusual.",
        "This gets reposted every few months with a new date.",
    ],
}


def rows():
    for domain, contents, prefix in (
        ("health", HEALTH, "h"),
        ("sports", SPORTS, "s"),
        ("tech", TECH, "t"),
    ):
        for ordinal, content in enumerate(contents, 1):
            item_id = f"{prefix}{ordinal:02d}"
            record = {
                "id": item_id,
                "content": content,
                "label": 1 if ordinal % 2 else 0,
                "domain": domain,
            }
            if ordinal in COMMENTED:
                bank = COMMENT_BANK[domain]
                record["comments"] = bank[: 2 + (ordinal % 2)]
            yield record


def main():
    path = os.path.join(HERE, "mini_corpus.jsonl")
    with open(path, "w", encoding="utf-8") as fh:
        for record in rows():
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
