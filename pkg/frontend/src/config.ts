export interface AppConfig {
  baseUrl: string;
  token: string;
  fps: number;
}

const DEFAULTS: AppConfig = { baseUrl: "", token: "", fps: 30 };

/** Static deployment config next to the page: service base URL and token. */
export async function loadConfig(url = "./config.json"): Promise<AppConfig> {
  try {
    const response = await fetch(url);
    if (!response.ok) return DEFAULTS;
    return { ...DEFAULTS, ...(await response.json()) };
  } catch {
    return DEFAULTS;
  }
}
