#!/usr/bin/env python3
"""Convert a MediaWiki XML dump into blank-line separated plain-text paragraphs.

Only prose paragraphs survive: headings, lists, tables, templates, references
and file links are dropped. Output is one file per article.

    python3 tools/wiki_to_text.py dump.xml OUT_DIR [--max-articles N]
"""
import argparse
import html
import os
import re
import xml.etree.ElementTree as ET


def strip_nested(text, open_tok, close_tok):
    out, depth, i = [], 0, 0
    while i < len(text):
        if text.startswith(open_tok, i):
            depth += 1
            i += len(open_tok)
        elif depth and text.startswith(close_tok, i):
            depth -= 1
            i += len(close_tok)
        else:
            if depth == 0:
                out.append(text[i])
            i += 1
    return "".join(out)


def replace_links(text):
    out, i = [], 0
    while True:
        j = text.find("[[", i)
        if j < 0:
            out.append(text[i:])
            break
        out.append(text[i:j])
        depth, k = 0, j
        while k < len(text):
            if text.startswith("[[", k):
                depth += 1
                k += 2
            elif text.startswith("]]", k):
                depth -= 1
                k += 2
                if depth == 0:
                    break
            else:
                k += 1
        inner = text[j + 2:k - 2]
        head = inner.split(":", 1)[0].lower()
        if head not in ("file", "image", "category") and "[[" not in inner:
            out.append(inner.split("|")[-1])
        i = k
    return "".join(out)


def clean(wikitext):
    t = html.unescape(wikitext)
    t = re.sub(r"<!--.*?-->", "", t, flags=re.S)
    t = re.sub(r"<ref[^>]*/>", "", t)
    t = re.sub(r"<ref[^>]*>.*?</ref>", "", t, flags=re.S)
    t = re.sub(r"<(math|gallery|table|timeline|code|pre)[^>]*>.*?</\1>", "", t, flags=re.S)
    t = strip_nested(t, "{{", "}}")
    t = strip_nested(t, "{|", "|}")
    t = replace_links(t)
    t = re.sub(r"\[https?://[^\s\]]+\s*([^\]]*)\]", r"\1", t)
    t = re.sub(r"<[^>]+>", "", t)
    t = t.replace("'''", "").replace("''", "")
    paragraphs = []
    for block in re.split(r"\n\s*\n", t):
        lines = [l.strip() for l in block.split("\n")]
        lines = [l for l in lines if l and l[0] not in "=*#:;|!{}" and not l.startswith("__")]
        para = " ".join(lines)
        para = re.sub(r"\(\s*[,;]?\s*\)", "", para)
        para = re.sub(r"\s+", " ", para).strip()
        if len(para) >= 80 and para.count(". ") >= 1:
            paragraphs.append(para)
    return paragraphs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dump")
    ap.add_argument("out_dir")
    ap.add_argument("--max-articles", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    written = 0
    total = 0
    for _, elem in ET.iterparse(args.dump):
        if not elem.tag.endswith("page"):
            continue
        title = text = None
        for child in elem.iter():
            if child.tag.endswith("title"):
                title = child.text
            elif child.tag.endswith("text"):
                text = child.text
        elem.clear()
        if not title or not text or text.lstrip().lower().startswith("#redirect"):
            continue
        paras = clean(text)
        if not paras:
            continue
        name = re.sub(r"[^a-z0-9]+", "_", title.lower()).strip("_")[:60]
        with open(os.path.join(args.out_dir, f"{written:04d}_{name}.txt"), "w", encoding="utf-8") as f:
            f.write("\n\n".join(paras) + "\n")
        written += 1
        total += len(paras)
        if args.max_articles and written >= args.max_articles:
            break
    print(f"articles={written} paragraphs={total}")


if __name__ == "__main__":
    main()
