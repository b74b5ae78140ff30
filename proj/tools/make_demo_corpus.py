#!/usr/bin/env python3
# Copyright 2026 The unistage Authors
# SPDX-License-Identifier: Apache-2.0
"""Generate the bundled synthetic demo corpus under data/demo/.

Four document classes with 50 documents each. Most documents are medical
prose assembled from sentence templates; a few per class are off-domain (the
density filter should drop them), a few are near-copies of earlier documents
(de-duplication should drop their segments) and a few are advertisements
(the quality heuristic should drop them).

The output is fully determined by --seed; re-running rewrites identical bytes.
"""

import argparse
import json
import random
from pathlib import Path

SCHEMA = "#schema=unistage/v1"
CLASSES = ["web", "literature", "encyclopedia", "book"]
DOCS_PER_CLASS = 50

TERMS_ZH = [
    "高血压", "糖尿病", "肝硬化", "腹水", "白蛋白", "胰岛素", "冠心病", "肺炎", "哮喘", "胃炎",
    "抗生素", "血糖", "血压", "心率", "发热", "咳嗽", "头痛", "贫血", "肾功能", "肝功能",
    "凝血酶原时间", "电解质", "并发症", "慢性病", "药物", "剂量", "症状", "诊断", "治疗", "预后",
    "患者", "医生", "感染", "炎症", "病毒", "疫苗", "手术", "化疗", "中医", "针灸",
]
TERMS_EN = [
    "hypertension", "diabetes", "cirrhosis", "ascites", "albumin", "insulin", "pneumonia",
    "asthma", "antibiotics", "symptoms", "diagnosis", "treatment", "prognosis", "patients",
    "infection", "inflammation", "vaccine", "surgery", "dosage", "clinical",
]
STOP = ["的", "了"]

ZH_TEMPLATES = [
    "{a}患者常见的{b}需要结合病史进行判断。",
    "对于{a}，医生通常会先评估{b}，再决定是否调整{c}。",
    "研究表明，长期{a}会增加{b}的风险，因此需要定期复查{c}。",
    "在{a}的早期阶段，{b}往往并不明显，容易被忽视。",
    "临床上，{a}与{b}经常同时出现，治疗时应兼顾两者。",
    "规范使用{a}可以减少{b}，但必须注意{c}的变化。",
    "如果出现{a}加重，应及时就医并检查{b}。",
    "指南建议，{a}患者每三个月监测一次{b}。",
    "{a}的诊断依赖于{b}和影像学检查的综合分析。",
    "饮食控制对{a}非常重要，高盐饮食会影响{b}。",
]
EN_TEMPLATES = [
    "Patients with {a} often present with {b} that require careful evaluation.",
    "The {a} of {b} depends on early detection and consistent follow-up.",
    "Clinical guidelines recommend monitoring {a} in all {b} at regular intervals.",
    "Long-term {a} may worsen {b}, so dosage should be reviewed.",
    "In most cases, {a} responds well to standard {b}.",
    "Doctors should explain the {a} and expected {b} to every patient.",
]
OFF_ZH = [
    "今天的比赛非常激烈，主队在最后一分钟扳平了比分。",
    "这道菜需要先把土豆切块，再用小火慢炖半小时。",
    "周末我们去了海边，沙滩上的游客比想象中少。",
    "新款手机的屏幕更大，拍照效果也有明显提升。",
    "城市地铁新线路开通以后，通勤时间缩短了不少。",
    "这本小说讲述了一个少年离开家乡去远方闯荡的故事。",
]
AD_ZH = [
    "糖尿病患者福音！限时优惠，特价药物抢购中，咨询热线 400-820-{n:04d}，加微信 tnb{n}888 免费咨询！",
    "高血压包治根治，无效退款！立即拨打电话 138-{n:04d}-6688，点击领取折扣，限时特价！",
    "Buy now! Special offer on diabetes insulin pens, call now 1-800-555-{n:04d}, free consultation, best price guaranteed!",
]


def zh_sentence(rng):
    t = rng.choice(ZH_TEMPLATES)
    a, b, c = rng.sample(TERMS_ZH, 3)
    return t.format(a=a, b=b, c=c)


def en_sentence(rng):
    t = rng.choice(EN_TEMPLATES)
    a, b = rng.sample(TERMS_EN, 2)
    return t.format(a=a, b=b)


def medical_text(rng, lang, sentences):
    if lang == "zh":
        return "".join(zh_sentence(rng) for _ in range(sentences))
    return " ".join(en_sentence(rng) for _ in range(sentences))


def near_copy(rng, text, lang):
    """Small edit that keeps 5-gram Jaccard similarity high."""
    if lang == "zh":
        cut = max(1, len(text) // 40)
        return text[:-cut] + "。"
    words = text.split(" ")
    if len(words) > 8:
        del words[rng.randrange(len(words))]
    return " ".join(words)


def build_documents(rng):
    docs = []
    by_class = {c: [] for c in CLASSES}
    for cls in CLASSES:
        for i in range(DOCS_PER_CLASS):
            doc_id = f"{cls}-{i:03d}"
            kind = "medical"
            if i % 10 == 3:
                kind = "off_domain"
            elif i % 10 == 7 and i >= 10:
                kind = "near_copy"
            elif cls == "web" and i % 10 == 5:
                kind = "ad"
            lang = "en" if i % 6 == 1 else "zh"
            if kind == "off_domain":
                lang = "zh"
                text = "".join(rng.choice(OFF_ZH) for _ in range(rng.randint(4, 8)))
            elif kind == "near_copy":
                base = rng.choice([d for d in by_class[cls] if d["meta"]["kind"] == "medical"])
                lang = base["language"]
                text = near_copy(rng, base["text"], lang)
            elif kind == "ad":
                n = rng.randrange(10000)
                ads = [rng.choice(AD_ZH).format(n=n) for _ in range(rng.randint(4, 7))]
                text = "".join(ads) if all(not a.startswith("Buy") for a in ads) else " ".join(ads)
                lang = "zh"
            else:
                text = medical_text(rng, lang, rng.randint(6, 30))
            doc = {
                "id": doc_id,
                "text": text,
                "language": lang,
                "doc_class": cls,
                "source_name": f"demo-{cls}",
                "meta": {"kind": kind},
            }
            by_class[cls].append(doc)
            docs.append(doc)
    return docs


def build_sft(rng):
    out = []
    for i in range(30):
        a, b = rng.sample(TERMS_ZH, 2)
        out.append({
            "id": f"sft-{i:03d}",
            "instruction": f"请问{a}和{b}之间有什么关系？",
            "output": zh_sentence(rng) + zh_sentence(rng),
            "origin": "sft_native",
            "attempts": 1,
            "model_tag": "demo",
        })
    for i in range(10):
        q1 = f"What should I know about {rng.choice(TERMS_EN)}?"
        a1 = en_sentence(rng)
        q2 = "Is there anything else I should watch for?"
        a2 = en_sentence(rng)
        out.append({
            "id": f"chat-{i:03d}",
            "instruction": q1,
            "output": a2,
            "origin": "general_chat",
            "attempts": 1,
            "model_tag": "demo",
            "turns": [
                {"role": "user", "text": q1},
                {"role": "assistant", "text": a1},
                {"role": "user", "text": q2},
                {"role": "assistant", "text": a2},
            ],
        })
    return out


def dump_jsonl(path, records):
    lines = [SCHEMA] + [json.dumps(r, ensure_ascii=False, sort_keys=True, separators=(",", ":")) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


CONFIG = {
    "seed": 20231016,
    "paths": {
        "input_dir": ".",
        "output_dir": "out",
        "documents": "documents.jsonl",
        "dictionary": "dictionary.txt",
        "stoplist": "stoplist.txt",
        "sft": "sft.jsonl",
    },
    "curate": {
        "density_threshold": 0.02,
        "window": 256,
        "flank": 1,
        "quality_judge": "heuristic",
        "quality_threshold": 0.5,
        "dedup_method": "ngram_jaccard",
        "dedup_threshold": 0.8,
    },
    "unify": {"backend": "generator", "max_attempts": 3, "deviation_threshold": 0.35, "in_flight": 1},
    "fidelity": {"method": "jaccard_1gram"},
    "schedule": {"beta": "2", "pretrain_epochs": 3, "sft_epochs": 1},
    "pack": {"length": 4096, "tokenizer": "desk"},
    "backends": {"generator": {"kind": "stub", "model_tag": "stub-echo"}},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "demo"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    dump_jsonl(out / "documents.jsonl", build_documents(rng))
    dump_jsonl(out / "sft.jsonl", build_sft(rng))
    (out / "dictionary.txt").write_text(
        "# demo medical dictionary\n" + "\n".join(TERMS_ZH + TERMS_EN) + "\n", encoding="utf-8")
    (out / "stoplist.txt").write_text("\n".join(STOP) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(CONFIG, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
