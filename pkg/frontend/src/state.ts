/**
 * Pure view-model builders shared by both faces. Everything here is a
 * function of API responses only; no hidden client-side state.
 */

import type { ChallengeSummary, GameEventRecord, Incident, Progress } from './api.js';

// -- player board --------------------------------------------------------

export interface CategoryGroup {
  category: string;
  challenges: ChallengeSummary[];
}

/** Group visible challenges by category, keeping server order within each. */
export function groupByCategory(challenges: ChallengeSummary[]): CategoryGroup[] {
  const groups = new Map<string, ChallengeSummary[]>();
  for (const c of challenges) {
    const bucket = groups.get(c.category) ?? [];
    bucket.push(c);
    groups.set(c.category, bucket);
  }
  return [...groups.entries()].map(([category, cs]) => ({ category, challenges: cs }));
}

export function progressLabel(progress: Progress): string {
  return `${progress.solved}/${progress.visible} solved · ${progress.score} points`;
}

/** Challenge ids present now but not in the previous poll (chain unlocks). */
export function newlyVisible(
  previous: ChallengeSummary[],
  current: ChallengeSummary[],
): string[] {
  const before = new Set(previous.map((c) => c.challenge_id));
  return current.map((c) => c.challenge_id).filter((id) => !before.has(id));
}

/** A paid hint needs an explicit confirmation before display. */
export function hintConfirmation(hint: { cost: number; topic_label: string }): string | null {
  if (hint.cost <= 0) return null;
  return `Displaying "${hint.topic_label}" costs ${hint.cost} points. Continue?`;
}

// -- instructor dashboard ------------------------------------------------

export interface ChallengeCounters {
  solves: number;
  wrongs: number;
  hintDisplays: number;
}

/**
 * Fold an event page into per-challenge counters. Pass the previous map to
 * keep a running total across cursor polls.
 */
export function foldCounters(
  events: GameEventRecord[],
  into: Map<string, ChallengeCounters> = new Map(),
): Map<string, ChallengeCounters> {
  const bump = (challenge: string, field: keyof ChallengeCounters) => {
    const row = into.get(challenge) ?? { solves: 0, wrongs: 0, hintDisplays: 0 };
    row[field] += 1;
    into.set(challenge, row);
  };
  for (const e of events) {
    if (e.kind === 'flag_submission') {
      const challenge = e['challenge'] as string;
      if (e['verdict'] === 'correct') bump(challenge, 'solves');
      else bump(challenge, 'wrongs');
    } else if (e.kind === 'hint_display') {
      const hint = e['hint'] as string;
      bump(hint.replace(/-h\d+$/, ''), 'hintDisplays');
    }
  }
  return into;
}

export interface IncidentRow {
  incident: Incident;
  badge: 'STRONG' | 'WEAK';
  headline: string;
}

const KIND_LABELS: Record<string, string> = {
  time_vicinity: 'Near-simultaneous solves',
  cross_flag: 'Flag of another challenge submitted',
  missing_download: 'Solved without required download',
  quick_chain_solve: 'Implausibly quick chain solve',
};

/** Strong incidents first, then by kind and participants, stable for tests. */
export function incidentPanel(incidents: Incident[]): IncidentRow[] {
  const rows = incidents.map((incident) => ({
    incident,
    badge: (incident.severity === 'strong' ? 'STRONG' : 'WEAK') as 'STRONG' | 'WEAK',
    headline:
      `${KIND_LABELS[incident.kind] ?? incident.kind}: ` +
      `${incident.players.join(' & ')} on ${incident.challenges.join(', ')}`,
  }));
  rows.sort((a, b) => {
    if (a.incident.severity !== b.incident.severity) {
      return a.incident.severity === 'strong' ? -1 : 1;
    }
    return a.headline < b.headline ? -1 : a.headline > b.headline ? 1 : 0;
  });
  return rows;
}

/**
 * Evidence drill-down: the raw events behind an incident. Uses the seq
 * numbers cited in the evidence when present, otherwise every event by the
 * involved players on the involved challenges.
 */
export function evidenceEvents(incident: Incident, feed: GameEventRecord[]): GameEventRecord[] {
  const cited = new Set<number>();
  for (const value of Object.values(incident.evidence)) {
    if (typeof value === 'number' && Number.isInteger(value)) {
      const key = Object.keys(incident.evidence).find((k) => incident.evidence[k] === value);
      if (key && (key === 'seq' || key.endsWith('_seq'))) cited.add(value);
    }
  }
  if (cited.size > 0) {
    return feed.filter((e) => cited.has(e.seq));
  }
  const players = new Set(incident.players);
  const challenges = new Set(incident.challenges);
  return feed.filter(
    (e) => players.has(e.player) && challenges.has((e['challenge'] as string) ?? ''),
  );
}
