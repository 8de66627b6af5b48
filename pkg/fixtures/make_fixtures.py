"""Regenerate every file in fixtures/ deterministically: python3 fixtures/make_fixtures.py"""
import json
import random
import warnings
from pathlib import Path

from avsd.corpus import dump_dataset, make_dialog, synthesize_features, write_feature_file
from avsd.topics import SeedLexicon, build_document_views, default_stopwords, train_lda

HERE = Path(__file__).resolve().parent

SCENES = [
    ("kitchen", "a man is cooking in the kitchen and washing a pan at the sink",
     ["kitchen", "cooking", "pan", "sink", "food", "stove"]),
    ("living", "a woman sits on the couch watching tv and holding a phone",
     ["couch", "tv", "phone", "sofa", "watch", "sit"]),
    ("bedroom", "a person lies on the bed and folds a blanket near the closet",
     ["bed", "blanket", "closet", "pillow", "sleep", "fold"]),
    ("door", "a man opens the door and walks into the hallway carrying a box",
     ["door", "hallway", "box", "walk", "open", "carry"]),
]

QUESTIONS = [
    ("is there any sound in the video ?", [("yes , there is music playing .", True), ("no , it is silent .", False)]),
    ("does he talk to anyone ?", [("no , he does not talk .", False), ("yes , he talks to someone .", True)]),
    ("what is the person doing ?", [("the person is {verb} the {obj} .", None)]),
    ("can you hear any noise ?", [("yes , i hear a loud noise .", True), ("no noise at all .", False)]),
    ("where is the {obj} ?", [("the {obj} is near the {place} .", None)]),
    ("is she holding the {obj} ?", [("yes she is .", True), ("no she is not .", False)]),
    ("how many people are there ?", [("only one person .", None)]),
    ("does the video end with him leaving ?", [("yes , he leaves the room .", True), ("no , he stays .", False)]),
]

VERBS = {"kitchen": "cooking", "living": "watching", "bedroom": "folding", "door": "carrying"}


def mini_dialogs(n=20, turns=4, seed=7):
    rng = random.Random(seed)
    dialogs = []
    for i in range(n):
        scene, caption, words = SCENES[i % len(SCENES)]
        qa = []
        for q_tpl, answers in rng.sample(QUESTIONS, turns):
            obj = rng.choice(words[:4])
            a_tpl, _ = rng.choice(answers)
            fill = {"obj": obj, "verb": VERBS[scene], "place": rng.choice(words[:4])}
            qa.append((q_tpl.format(**fill), a_tpl.format(**fill)))
        dialogs.append(make_dialog(f"vid{i:03d}", caption, qa))
    return dialogs


def overfit_dialogs():
    """10 dialogs x 2 turns, short distinct answers."""
    colors = ["red", "blue", "green", "black", "white", "yellow", "brown", "pink", "gray", "orange"]
    things = ["cup", "hat", "ball", "shoe", "book", "lamp", "bag", "pen", "box", "key"]
    dialogs = []
    for i, (c, t) in enumerate(zip(colors, things)):
        qa = [(f"what color is the {t} ?", f"it is {c} ."),
              (f"what does he hold ?", f"a {c} {t} .")]
        dialogs.append(make_dialog(f"ovf{i:02d}", f"a man holds a {c} {t}", qa))
    return dialogs


LABELED_TURNS = [
    {"question": "is there any music ?", "answer": "yes , soft music .",
     "binary_question": True, "binary_answer": True, "polarity": "yes",
     "has_coref_q": False, "has_coref_a": False, "audio_q": True, "audio_a": True},
    {"question": "what is he holding ?", "answer": "a cup of coffee .",
     "binary_question": False, "binary_answer": False, "polarity": None,
     "has_coref_q": True, "has_coref_a": False, "audio_q": False, "audio_a": False},
    {"question": "does she say anything ?", "answer": "no , she stays quiet the whole time .",
     "binary_question": True, "binary_answer": True, "polarity": "no",
     "has_coref_q": True, "has_coref_a": True, "audio_q": False, "audio_a": True},
    {"question": "how many people are in the room ?", "answer": "just one man .",
     "binary_question": False, "binary_answer": False, "polarity": None,
     "has_coref_q": False, "has_coref_a": False, "audio_q": False, "audio_a": False},
    {"question": "can you hear the dog barking ?", "answer": "nope , i can not .",
     "binary_question": True, "binary_answer": True, "polarity": "no",
     "has_coref_q": False, "has_coref_a": False, "audio_q": True, "audio_a": False},
    {"question": "where does the video take place ?", "answer": "in a kitchen , it looks like a house .",
     "binary_question": False, "binary_answer": False, "polarity": None,
     "has_coref_q": False, "has_coref_a": True, "audio_q": False, "audio_a": False},
]

TINY_SEEDS = {"topics": [
    {"name": "Kitchen", "seeds": ["kitchen", "cooking", "pan", "sink", "food", "stove"]},
    {"name": "LivingRoom", "seeds": ["couch", "tv", "phone", "sofa", "watch"]},
    {"name": "Sound", "seeds": ["sound", "music", "noise", "hear", "talk", "silent", "loud"]},
]}


def grid(topic_dir="topic_models"):
    common_train = {"max_epochs": 3, "batch_size": 8, "learning_rate": 0.01, "rng_seed": 3}
    common_model = {"embed_dim": 16, "hidden_dim": 16, "max_decode_len": 12, "rng_seed": 3}
    data = {"train_data": "mini_train.json", "valid_data": "mini_valid.json", "test_data": "mini_test.json",
            "features": "features"}
    return [
        {"name": "baseline", **data, "model": dict(common_model), "train": dict(common_train)},
        {"name": "sent_all_aclnet", **data,
         "model": {**common_model, "attention_mode": "sent_all", "audio_mode": "aclnet50"},
         "train": dict(common_train)},
        {"name": "guided_qa_caption", **data, "topic_models": topic_dir, "fold_in_iterations": 20,
         "model": {**common_model, "topic_mode": "features_qa_caption", "K": 3},
         "train": dict(common_train)},
    ]


def main():
    # category vocabularies legitimately miss some seed words
    warnings.simplefilter("ignore", UserWarning)
    mini = mini_dialogs()
    dump_dataset(mini, HERE / "mini.json")
    dump_dataset(mini[:14], HERE / "mini_train.json")
    dump_dataset(mini[14:17], HERE / "mini_valid.json")
    dump_dataset(mini[17:], HERE / "mini_test.json")
    dump_dataset(overfit_dialogs(), HERE / "overfit10.json")
    feat = HERE / "features"
    feat.mkdir(exist_ok=True)
    for d in mini:
        vg = synthesize_features(d.video_id, seed=11, d_a=128, d_v=16, n_frames=4)
        ac = synthesize_features(d.video_id, seed=11, d_a=50, d_v=16, n_frames=4, audio_kind="aclnet")
        write_feature_file(feat / f"{d.video_id}.vggish.txt", vg.audio_frames)
        write_feature_file(feat / f"{d.video_id}.aclnet.txt", ac.audio_frames)
        write_feature_file(feat / f"{d.video_id}.video.txt", vg.video_frames)
    (HERE / "labeled_turns.json").write_text(json.dumps(LABELED_TURNS, indent=1) + "\n")
    (HERE / "seeds_tiny.json").write_text(json.dumps(TINY_SEEDS, indent=1) + "\n")
    (HERE / "grid.json").write_text(json.dumps(grid(), indent=1) + "\n")
    lex = SeedLexicon.from_json(TINY_SEEDS)
    out = HERE / "topic_models"
    out.mkdir(exist_ok=True)
    for cat in ("question", "qa_pair", "caption"):
        docs = [v.tokens for v in build_document_views(mini[:14], cat)]
        train_lda(docs, alpha=0.1, beta=0.01, iterations=50, rng_seed=5, seed_lexicon=lex,
                  stopwords=default_stopwords(), category=cat).save(out / f"{cat}.json")


if __name__ == "__main__":
    main()
