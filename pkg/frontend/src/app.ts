import type { ApiClient, LoginResult } from "./api.js";
import { Session } from "./session.js";
import type { Ctx } from "./ctx.js";
import { clear, el } from "./dom.js";
import { authView } from "./views/auth.js";
import { browseView } from "./views/browse.js";
import { sellView } from "./views/sell.js";
import { requestsView } from "./views/requests.js";
import { promptsModal } from "./views/prompts.js";

export const PROMPT_POLL_MS = 10_000;

export interface AppOptions {
  api: ApiClient;
  session?: Session;
  pollMs?: number;
}

export interface AppHandle {
  session: Session;
  stop(): void;
}

type Tab = "browse" | "sell" | "requests";

export function mountApp(root: HTMLElement, options: AppOptions): AppHandle {
  const api = options.api;
  const session = options.session ?? new Session();
  let poller: ReturnType<typeof setInterval> | null = null;
  let modal: HTMLElement | null = null;

  const pointsNode = el("span", { id: "points" });
  const promptCount = el("span", { id: "prompt-count" }, "0");

  const ctx: Ctx = {
    api,
    session,
    async refreshPoints() {
      const view = await api.myReputation();
      session.setPoints(view.credited);
      clear(pointsNode);
      pointsNode.append(String(view.credited));
    },
    async refreshPrompts() {
      session.promptQueue = await api.myPrompts();
      clear(promptCount);
      promptCount.append(String(session.promptQueue.length));
    },
  };

  function paintAuth(): void {
    clear(root);
    root.append(authView(api, onLogin));
  }

  function onLogin(result: LoginResult): void {
    session.start(result.profile);
    paintShell();
    clear(pointsNode);
    pointsNode.append(String(result.profile.creditedPoints));
    // the login-time ritual: fresh prompts and a fresh ledger snapshot
    void (async () => {
      await ctx.refreshPrompts();
      await ctx.refreshPoints();
      if (session.promptQueue.length > 0) openPrompts();
    })().catch(() => {
      // header keeps the login-payload totals; the poller retries soon
    });
    poller = setInterval(() => {
      if (session.active) void ctx.refreshPrompts().catch(() => {});
    }, options.pollMs ?? PROMPT_POLL_MS);
  }

  function logout(): void {
    api.logout();
    session.end();
    if (poller !== null) clearInterval(poller);
    poller = null;
    paintAuth();
  }

  const main = el("main", { id: "view" });

  function openTab(tab: Tab): void {
    clear(main);
    if (tab === "browse") main.append(browseView(ctx));
    else if (tab === "sell") main.append(sellView(ctx));
    else main.append(requestsView(ctx));
  }

  function openPrompts(): void {
    if (modal !== null) return;
    modal = promptsModal(ctx, () => {
      modal?.remove();
      modal = null;
    });
    root.append(modal);
  }

  function paintShell(): void {
    clear(root);
    const tabButton = (tab: Tab, label: string) => {
      const button = el("button", { class: `tab tab-${tab}` }, label);
      button.addEventListener("click", () => openTab(tab));
      return button;
    };
    const promptsButton = el("button", { id: "prompts-toggle" }, "Prompts ", promptCount);
    promptsButton.addEventListener("click", openPrompts);
    const logoutButton = el("button", { id: "logout" }, "Sign out");
    logoutButton.addEventListener("click", logout);
    root.append(
      el(
        "header",
        {},
        el("strong", {}, "campusmarket"),
        el("span", { id: "who" }, session.profile?.name ?? ""),
        el("span", { class: "points-wrap" }, "points: ", pointsNode),
        promptsButton,
        logoutButton,
      ),
      el(
        "nav",
        {},
        tabButton("browse", "Browse"),
        tabButton("sell", "Sell"),
        tabButton("requests", "My requests"),
      ),
      main,
    );
    openTab("browse");
  }

  paintAuth();
  return {
    session,
    stop() {
      if (poller !== null) clearInterval(poller);
      poller = null;
    },
  };
}
