// Post-run results panel. Every number is shown exactly as the server
// sent it; the UI does no statistics of its own.

import { ReportMsg, ReportRow } from "./protocol.js";

export interface ReportCard {
  title: string;
  fields: [string, string][];
  bins: [number, number][];
}

const show = (x: number | null): string => (x === null ? "-" : String(x));

export function reportCards(report: ReportMsg): ReportCard[] {
  return report.rows.map((row: ReportRow) => {
    const hist = report.histograms.find(
      (h) => h.driver === row.driver && h.mode === row.mode
    );
    return {
      title: `${row.mode} / ${row.feedback}`,
      fields: [
        ["driver", row.driver],
        ["samples", String(row.count)],
        ["eps_tau mean", show(row.tau_mean)],
        ["|mean|", show(row.tau_abs_mean)],
        ["std", show(row.tau_std)],
        ["reduction mean %", show(row.reduction_mean)],
        ["reduction std %", show(row.reduction_std)],
      ],
      bins: hist ? hist.bins : [],
    };
  });
}

export function renderReport(el: HTMLElement, report: ReportMsg): void {
  el.textContent = "";
  const cards = reportCards(report);
  if (cards.length === 0) {
    const p = el.ownerDocument.createElement("p");
    p.textContent = "no data";
    el.appendChild(p);
    return;
  }
  for (const card of cards) {
    const div = el.ownerDocument.createElement("div");
    div.className = "report-card";
    const h = el.ownerDocument.createElement("h3");
    h.textContent = card.title;
    div.appendChild(h);
    const dl = el.ownerDocument.createElement("dl");
    for (const [k, v] of card.fields) {
      const dt = el.ownerDocument.createElement("dt");
      dt.textContent = k;
      const dd = el.ownerDocument.createElement("dd");
      dd.textContent = v;
      dl.appendChild(dt);
      dl.appendChild(dd);
    }
    div.appendChild(dl);
    if (card.bins.length > 0) {
      const strip = el.ownerDocument.createElement("div");
      strip.className = "hist";
      const peak = Math.max(...card.bins.map(([, n]) => n));
      for (const [left, n] of card.bins) {
        const bar = el.ownerDocument.createElement("span");
        bar.className = "hist-bar";
        bar.title = `${left}: ${n}`;
        bar.style.height = `${Math.round((n / peak) * 48) + 2}px`;
        strip.appendChild(bar);
      }
      div.appendChild(strip);
    }
    el.appendChild(div);
  }
}
